fn main() {
    std::process::exit(lexrag_cli::run(std::env::args_os()));
}
