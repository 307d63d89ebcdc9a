fn main() {
    std::process::exit(matcube::cli::run(std::env::args_os()));
}
