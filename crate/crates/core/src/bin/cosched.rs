fn main() {
    std::process::exit(cosched::cli::run(std::env::args_os()));
}
