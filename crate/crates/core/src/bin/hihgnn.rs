fn main() {
    std::process::exit(hihgnn::cli::main_from(std::env::args_os()));
}
