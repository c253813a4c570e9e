fn main() {
    std::process::exit(logratio::cli::run(std::env::args_os()));
}
