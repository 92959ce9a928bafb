fn main() {
    std::process::exit(covapix::cli::run(std::env::args_os()));
}
