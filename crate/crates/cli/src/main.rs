fn main() {
    std::process::exit(condensate_cli::run(std::env::args_os()));
}
