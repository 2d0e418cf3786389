fn main() {
    std::process::exit(almg_core::cli::main_with_args(std::env::args_os()));
}
