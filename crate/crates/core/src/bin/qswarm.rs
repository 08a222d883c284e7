fn main() {
    std::process::exit(qswarm::cli::main_with_args(std::env::args_os()));
}
