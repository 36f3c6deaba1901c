fn main() {
    std::process::exit(bdns::cli::main_with(std::env::args_os()));
}
