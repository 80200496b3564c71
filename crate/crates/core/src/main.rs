fn main() {
    std::process::exit(tsrd::cli::run(std::env::args_os()));
}
