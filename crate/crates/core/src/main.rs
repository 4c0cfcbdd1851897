fn main() {
    std::process::exit(combforge::cli::run(std::env::args_os()));
}
