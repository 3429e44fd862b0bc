fn main() {
    std::process::exit(bergman_cli::run_cli(std::env::args_os()));
}
