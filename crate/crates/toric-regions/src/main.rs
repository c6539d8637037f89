fn main() {
    std::process::exit(toric_regions::cli_io::run(std::env::args_os()));
}
