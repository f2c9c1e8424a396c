fn main() {
    std::process::exit(styleqgan::cli::run(std::env::args_os()));
}
