fn main() {
    std::process::exit(pdfrelay::cli::main_with_args(std::env::args_os()));
}
