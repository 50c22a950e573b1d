fn main() {
    std::process::exit(rrimpute::cli::dispatch(std::env::args_os()));
}
