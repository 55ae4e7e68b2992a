fn main() {
    std::process::exit(hammrl::cli::run(std::env::args_os()));
}
