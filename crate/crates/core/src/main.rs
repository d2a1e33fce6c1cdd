fn main() {
    std::process::exit(codeswitch::cli::run(std::env::args_os()));
}
