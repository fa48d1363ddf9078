fn main() {
    std::process::exit(lfrg::cli::main_with_args(std::env::args_os()));
}
