fn main() {
    std::process::exit(bd::cli::run(std::env::args()));
}
