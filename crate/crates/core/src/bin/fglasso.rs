fn main() {
    std::process::exit(fglasso::cli::run(std::env::args_os()));
}
