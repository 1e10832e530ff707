fn main() {
    std::process::exit(lonelywalks_harness::cli::run(std::env::args_os()));
}
