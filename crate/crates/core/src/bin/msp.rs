fn main() {
    std::process::exit(msp::cli::run(std::env::args_os()));
}
