fn main() {
    std::process::exit(koch_sipdg::cli::run(std::env::args_os()));
}
