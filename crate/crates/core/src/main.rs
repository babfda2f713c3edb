fn main() {
    std::process::exit(autorec::cli::run(std::env::args_os()));
}
