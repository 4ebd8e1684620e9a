fn main() {
    std::process::exit(sheet_kalman::cli::dispatch(std::env::args_os()));
}
