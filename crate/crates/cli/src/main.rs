fn main() {
    std::process::exit(hybridqa_cli::run(std::env::args_os()));
}
