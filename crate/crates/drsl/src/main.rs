fn main() {
    std::process::exit(drsl::cli::run_cli(std::env::args_os()));
}
