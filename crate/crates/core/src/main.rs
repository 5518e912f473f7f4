fn main() {
    std::process::exit(mlmf::cli::run(std::env::args_os()));
}
