fn main() {
    std::process::exit(apgcert_cli::main_with_args(std::env::args_os()));
}
