fn main() {
    std::process::exit(mhn::cli::run(std::env::args_os()));
}
