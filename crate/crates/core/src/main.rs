fn main() {
    std::process::exit(bootrobopt::cli::run(std::env::args_os()));
}
