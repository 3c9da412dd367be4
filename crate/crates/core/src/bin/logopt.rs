fn main() {
    std::process::exit(logopt::cli::run(std::env::args_os()));
}
