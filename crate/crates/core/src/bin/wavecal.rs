fn main() {
    std::process::exit(wavecal::cli::main());
}
