fn main() {
    std::process::exit(tarpit_escape::harness::cli::run(std::env::args_os()));
}
