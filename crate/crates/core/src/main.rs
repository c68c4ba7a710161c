fn main() {
    std::process::exit(passage_lab::cli::run(std::env::args_os()));
}
