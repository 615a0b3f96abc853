fn main() {
    std::process::exit(fkgompertz::cli::run_cli(std::env::args_os()));
}
