fn main() {
    std::process::exit(dbalign::cli::dispatch(std::env::args_os()));
}
