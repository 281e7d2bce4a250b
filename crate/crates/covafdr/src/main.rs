fn main() {
    std::process::exit(covafdr::cli::run());
}
