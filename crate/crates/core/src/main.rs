fn main() {
    std::process::exit(retrofund::cli::run(std::env::args_os()));
}
