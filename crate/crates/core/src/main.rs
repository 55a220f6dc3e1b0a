fn main() {
    std::process::exit(update_consistency::cli::main());
}
