fn main() {
    std::process::exit(hsgd::harness::cli_main(std::env::args_os()));
}
