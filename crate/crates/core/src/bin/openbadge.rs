fn main() {
    std::process::exit(openbadge::cli::run_from_env());
}
