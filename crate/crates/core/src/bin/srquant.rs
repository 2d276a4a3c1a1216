fn main() {
    std::process::exit(srquant::cli::run_cli(std::env::args_os()));
}
