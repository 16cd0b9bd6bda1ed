fn main() {
    std::process::exit(sonic_cli::run(std::env::args_os()));
}
