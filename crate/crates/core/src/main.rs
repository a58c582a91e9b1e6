fn main() {
    std::process::exit(sfi_core::cli::run(std::env::args_os()));
}
