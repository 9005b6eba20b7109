fn main() {
    std::process::exit(retdist::cli::run());
}
