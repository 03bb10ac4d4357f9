fn main() {
    std::process::exit(capsule::cli::run(std::env::args_os()));
}
