fn main() {
    std::process::exit(perfpipe::cli::main_with(std::env::args_os()));
}
