fn main() {
    std::process::exit(taba::cli::run_cli(std::env::args_os()));
}
