fn main() {
    std::process::exit(shilov::cli::run(std::env::args_os()));
}
