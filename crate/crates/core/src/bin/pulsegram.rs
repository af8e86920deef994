fn main() {
    let code = pulsegram::cli::run(std::env::args_os());
    std::process::exit(code);
}
