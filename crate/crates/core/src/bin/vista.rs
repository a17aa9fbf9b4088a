fn main() {
    std::process::exit(vista::cli::main_with_args(std::env::args_os()));
}
