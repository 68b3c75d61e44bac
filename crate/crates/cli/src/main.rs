fn main() {
    std::process::exit(causeway_cli::main_with(std::env::args_os()));
}
