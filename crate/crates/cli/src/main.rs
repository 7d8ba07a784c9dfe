fn main() {
    std::process::exit(ftpath_cli::run(std::env::args_os()));
}
