fn main() {
    std::process::exit(blindqc::cli::main_with_args(std::env::args_os()));
}
