fn main() {
    std::process::exit(boundkey::cli::main_with_args(std::env::args_os()));
}
