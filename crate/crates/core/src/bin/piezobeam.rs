fn main() {
    std::process::exit(piezobeam::cli::main_with_args());
}
