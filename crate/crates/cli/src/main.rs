fn main() {
    std::process::exit(wellstate::run_cli(std::env::args_os()));
}
