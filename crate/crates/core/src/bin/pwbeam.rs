fn main() {
    std::process::exit(pwbeam::cli::cli_main(std::env::args_os()));
}
