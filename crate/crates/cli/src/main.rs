fn main() {
    std::process::exit(psido_cli::run(std::env::args_os()));
}
