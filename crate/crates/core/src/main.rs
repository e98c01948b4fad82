fn main() {
    std::process::exit(ledcam::cli::run_from(std::env::args_os()));
}
