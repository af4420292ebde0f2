fn main() {
    std::process::exit(mixfrac_core::cli::run_cli(std::env::args_os()));
}
