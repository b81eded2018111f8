fn main() {
    std::process::exit(querymod::cli::run(std::env::args_os()));
}
