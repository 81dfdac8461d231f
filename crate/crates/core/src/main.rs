fn main() {
    std::process::exit(repograph::cli::run(std::env::args_os()));
}
