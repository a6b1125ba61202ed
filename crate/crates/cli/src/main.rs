fn main() {
    let code = transitory_cli::run(std::env::args_os(), std::env::vars().collect());
    std::process::exit(code);
}
