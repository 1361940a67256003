fn main() {
    std::process::exit(uavtrack_cli::run(std::env::args_os()));
}
