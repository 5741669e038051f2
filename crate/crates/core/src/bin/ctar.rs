fn main() {
    std::process::exit(ctar::cli::main_with_args(std::env::args_os()));
}
