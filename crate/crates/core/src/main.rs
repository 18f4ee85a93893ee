fn main() {
    std::process::exit(logit_landscape::cli::run_command(std::env::args_os()));
}
