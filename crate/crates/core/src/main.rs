fn main() {
    std::process::exit(collective::cli::run(std::env::args_os()));
}
