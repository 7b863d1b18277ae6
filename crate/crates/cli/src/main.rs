fn main() {
    std::process::exit(distboost_cli::main_with_args(std::env::args_os()));
}
