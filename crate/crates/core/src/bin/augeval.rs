fn main() {
    std::process::exit(augeval::cli::run(std::env::args_os()));
}
