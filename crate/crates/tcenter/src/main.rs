fn main() {
    std::process::exit(tcenter::cli::run(std::env::args_os()));
}
