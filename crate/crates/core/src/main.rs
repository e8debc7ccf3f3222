fn main() {
    std::process::exit(jumptrack::cli::run(std::env::args_os()));
}
