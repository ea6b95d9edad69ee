fn main() {
    std::process::exit(vvlab::cli::run(std::env::args_os()));
}
