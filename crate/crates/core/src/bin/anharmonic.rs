fn main() {
    std::process::exit(anharmonic::cli::run_from_args(std::env::args_os()));
}
