fn main() {
    std::process::exit(splatnav_cli::run(std::env::args()));
}
