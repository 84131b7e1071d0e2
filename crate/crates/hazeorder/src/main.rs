fn main() {
    std::process::exit(hazeorder::cli::run(std::env::args_os()));
}
