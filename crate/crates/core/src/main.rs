fn main() {
    std::process::exit(atse::cli::main_with_args(std::env::args_os()));
}
