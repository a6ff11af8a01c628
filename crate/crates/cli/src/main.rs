fn main() {
    std::process::exit(gmje_cli::run(std::env::args_os()));
}
