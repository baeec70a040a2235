fn main() {
    std::process::exit(cinetrans::cli::run_from_args(std::env::args_os()));
}
