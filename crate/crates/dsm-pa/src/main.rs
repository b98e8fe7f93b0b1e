fn main() {
    std::process::exit(dsm_pa::harness::cli_main(std::env::args()));
}
