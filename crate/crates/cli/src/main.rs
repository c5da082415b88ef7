fn main() {
    std::process::exit(pdflow_cli::run_cli(std::env::args_os()));
}
