fn main() {
    std::process::exit(cmj_tools::cli::main_with_args(std::env::args_os()));
}
