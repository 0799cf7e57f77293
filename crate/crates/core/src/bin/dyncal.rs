fn main() {
    std::process::exit(dyncal::cli::run(std::env::args_os()));
}
