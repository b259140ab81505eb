fn main() {
    std::process::exit(neurosens::cli::main_with_args(std::env::args_os()));
}
