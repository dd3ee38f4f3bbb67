fn main() {
    std::process::exit(tsinfo_cli::run(std::env::args_os()));
}
