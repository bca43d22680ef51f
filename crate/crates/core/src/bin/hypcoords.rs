fn main() {
    std::process::exit(hypcoords::cli::run(std::env::args_os()));
}
