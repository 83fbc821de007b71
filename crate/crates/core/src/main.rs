fn main() {
    std::process::exit(sbsn::toolkit::cli::run(std::env::args_os()));
}
