fn main() {
    std::process::exit(rydspec::cli::run());
}
