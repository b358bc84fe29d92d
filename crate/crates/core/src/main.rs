fn main() {
    std::process::exit(hatebench::cli::main());
}
