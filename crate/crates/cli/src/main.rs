fn main() {
    std::process::exit(scenred_cli::run_cli(std::env::args_os()));
}
