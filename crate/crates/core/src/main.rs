fn main() {
    std::process::exit(smbo::cli::run_cli(std::env::args_os()));
}
