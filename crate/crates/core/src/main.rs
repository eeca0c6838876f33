fn main() {
    std::process::exit(ionsim::harness::cli_main(std::env::args_os()));
}
