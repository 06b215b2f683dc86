fn main() {
    std::process::exit(ewpitman_cli::main_with_args(std::env::args_os()));
}
