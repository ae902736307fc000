fn main() {
    std::process::exit(appearloc::cli::run(std::env::args_os()));
}
