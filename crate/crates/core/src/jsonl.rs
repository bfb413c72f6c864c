//! Line-delimited JSON helpers.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn to_writer<'a, T, W>(mut w: W, records: impl IntoIterator<Item = &'a T>) -> io::Result<()>
where
    T: Serialize + 'a,
    W: Write,
{
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_file<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> io::Result<()> {
    to_writer(BufWriter::new(File::create(path)?), records)
}

/// Reads every non-blank line as `T`, failing on the first bad line.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads lines as loose JSON values so callers can reject records one by one.
/// Lines that are not JSON at all come back as `Err` with the line text.
pub fn read_values(path: &Path) -> io::Result<Vec<Result<serde_json::Value, String>>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|_| line));
    }
    Ok(out)
}
