fn main() {
    std::process::exit(splitlink::cli::run(std::env::args_os()));
}
