fn main() {
    std::process::exit(wavecart::cli::main_with_args(std::env::args_os()));
}
