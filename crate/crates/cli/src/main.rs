fn main() {
    std::process::exit(evd_cli::run(std::env::args_os()));
}
