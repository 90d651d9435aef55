fn main() {
    std::process::exit(ipoperf_cli::run(std::env::args_os()));
}
