fn main() {
    std::process::exit(terasim::cli::run(std::env::args_os()));
}
