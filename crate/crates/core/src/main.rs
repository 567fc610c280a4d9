fn main() {
    std::process::exit(n2sid::cli::run(std::env::args_os()));
}
