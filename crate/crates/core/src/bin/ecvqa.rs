fn main() {
    std::process::exit(ecvqa::cli::run(std::env::args_os()));
}
