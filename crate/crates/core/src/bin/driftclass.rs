fn main() {
    std::process::exit(driftclass::harness::cli_main(std::env::args_os()));
}
