fn main() {
    std::process::exit(fogauction::cli::main_with(std::env::args_os()));
}
