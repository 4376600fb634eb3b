fn main() {
    std::process::exit(givens::cli::run_from(std::env::args_os()));
}
