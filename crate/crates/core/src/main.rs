fn main() {
    let code = kgpretrain::cli::run_command(std::env::args_os());
    std::process::exit(code);
}
