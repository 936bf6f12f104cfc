fn main() {
    std::process::exit(gar_cli::run_command(std::env::args_os()));
}
