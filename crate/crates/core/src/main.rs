fn main() {
    std::process::exit(ers::cli::main_with_args(std::env::args_os()));
}
