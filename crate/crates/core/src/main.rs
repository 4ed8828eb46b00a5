fn main() {
    std::process::exit(polar_dirac::cli::run(std::env::args_os()));
}
