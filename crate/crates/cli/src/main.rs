fn main() {
    std::process::exit(mgrl_cli::main_with_args(std::env::args_os()));
}
