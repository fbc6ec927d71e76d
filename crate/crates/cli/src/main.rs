fn main() {
    std::process::exit(polardepth_cli::main_with_args(std::env::args_os()));
}
