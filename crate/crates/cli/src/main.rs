fn main() {
    let code = eeg_entropy_cli::main_with_args(std::env::args().collect());
    std::process::exit(code);
}
