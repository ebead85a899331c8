fn main() {
    std::process::exit(rcnav_cli::run(std::env::args().skip(1).collect()));
}
