fn main() {
    std::process::exit(dense_orbits_cli::main_with(std::env::args_os()));
}
