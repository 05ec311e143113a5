fn main() {
    std::process::exit(qpm_cli::run_from_args(std::env::args_os()));
}
