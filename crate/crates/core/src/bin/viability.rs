fn main() {
    std::process::exit(viability::cli::run(std::env::args_os()));
}
