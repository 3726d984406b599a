fn main() {
    std::process::exit(safetest::cli::run(std::env::args_os()));
}
