fn main() {
    std::process::exit(relfactor::cli::run(std::env::args_os()));
}
