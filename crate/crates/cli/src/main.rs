fn main() {
    std::process::exit(ebe_cli::main_with_args(std::env::args_os()));
}
