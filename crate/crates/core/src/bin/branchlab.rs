fn main() {
    std::process::exit(branchlab::cli::main());
}
