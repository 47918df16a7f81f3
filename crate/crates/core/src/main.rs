fn main() {
    std::process::exit(qscissors::cli::run(std::env::args_os()));
}
