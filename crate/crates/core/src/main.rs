fn main() {
    std::process::exit(attnlab::cli::main());
}
