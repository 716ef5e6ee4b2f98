fn main() {
    std::process::exit(thermopan::cli::dispatch(std::env::args_os()));
}
