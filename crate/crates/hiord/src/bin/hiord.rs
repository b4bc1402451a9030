fn main() {
    std::process::exit(hiord::cli::main());
}
