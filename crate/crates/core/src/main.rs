fn main() {
    std::process::exit(sepode::cli::run(std::env::args_os()));
}
