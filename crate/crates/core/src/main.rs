fn main() {
    std::process::exit(ccdpd::cli::run(std::env::args_os()));
}
