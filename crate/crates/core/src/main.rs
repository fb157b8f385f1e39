fn main() {
    std::process::exit(concentration::cli::main_with_args(std::env::args_os()));
}
