//! Append-only JSONL segments.
//!
//! Each line is `{"offset": n, "record": ...}` with offsets counting up from
//! zero. A batch is written, flushed and synced before the caller publishes
//! it, so readers never see a record that is not on disk. A torn final line
//! left by a crash is cut off when the segment is reopened.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Volumes,
    Events,
    Scans,
}

impl SegmentKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SegmentKind::Volumes => "volumes.jsonl",
            SegmentKind::Events => "events.jsonl",
            SegmentKind::Scans => "scans.jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry<T> {
    pub offset: u64,
    pub record: T,
}

#[derive(Debug)]
pub struct Segment<T> {
    path: PathBuf,
    file: File,
    next_offset: u64,
    _record: PhantomData<fn() -> T>,
}

impl<T: Serialize + DeserializeOwned> Segment<T> {
    /// Opens or creates the segment and returns every intact record.
    pub fn open(path: &Path) -> io::Result<(Self, Vec<T>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut records = Vec::new();
        let mut good_len = 0u64;
        let mut next_offset = 0u64;
        {
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 || !line.ends_with('\n') {
                    break;
                }
                let Ok(entry) = serde_json::from_str::<Entry<T>>(&line) else {
                    break;
                };
                if entry.offset != next_offset {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!(
                            "{}: offset {} where {next_offset} expected",
                            path.display(),
                            entry.offset
                        ),
                    ));
                }
                next_offset += 1;
                good_len += n as u64;
                records.push(entry.record);
            }
        }
        if file.metadata()?.len() > good_len {
            tracing::warn!(path = %path.display(), keep = good_len, "truncating torn segment tail");
            file.set_len(good_len)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                next_offset,
                _record: PhantomData,
            },
            records,
        ))
    }

    /// Appends and syncs a batch. Returns the offset of its first record.
    pub fn append(&mut self, records: &[T]) -> io::Result<u64> {
        let first = self.next_offset;
        if records.is_empty() {
            return Ok(first);
        }
        let mut buf = Vec::new();
        for (i, record) in records.iter().enumerate() {
            serde_json::to_writer(
                &mut buf,
                &Entry {
                    offset: first + i as u64,
                    record,
                },
            )?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        self.next_offset += records.len() as u64;
        Ok(first)
    }

    pub fn len(&self) -> u64 {
        self.next_offset
    }

    pub fn is_empty(&self) -> bool {
        self.next_offset == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reopen_sees_appended_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let (mut seg, recs) = Segment::<i64>::open(&path).unwrap();
        assert!(recs.is_empty());
        assert_eq!(seg.append(&[10, 20]).unwrap(), 0);
        assert_eq!(seg.append(&[30]).unwrap(), 2);
        drop(seg);
        let (seg, recs) = Segment::<i64>::open(&path).unwrap();
        assert_eq!(recs, vec![10, 20, 30]);
        assert_eq!(seg.len(), 3);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let (mut seg, _) = Segment::<i64>::open(&path).unwrap();
        seg.append(&[1, 2]).unwrap();
        drop(seg);
        let full = std::fs::metadata(&path).unwrap().len();
        OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"{\"offset\":2,\"rec")
            .unwrap();
        let (mut seg, recs) = Segment::<i64>::open(&path).unwrap();
        assert_eq!(recs, vec![1, 2]);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), full);
        seg.append(&[3]).unwrap();
        assert_eq!(Segment::<i64>::open(&path).unwrap().1, vec![1, 2, 3]);
    }

    #[test]
    fn offsets_must_be_contiguous() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(
            &path,
            "{\"offset\":0,\"record\":1}\n{\"offset\":5,\"record\":2}\n",
        )
        .unwrap();
        assert!(Segment::<i64>::open(&path).is_err());
    }
}
