fn main() {
    std::process::exit(anitherm_cli::main_with_args(std::env::args_os()));
}
