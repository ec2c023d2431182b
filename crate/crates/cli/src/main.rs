fn main() {
    std::process::exit(nodal_cli::run(std::env::args_os()));
}
