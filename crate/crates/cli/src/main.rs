fn main() {
    std::process::exit(isa_cli::run(std::env::args_os()));
}
