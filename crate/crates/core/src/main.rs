fn main() {
    std::process::exit(kanhead::cli::run());
}
