fn main() {
    std::process::exit(bridgewalk::cli::run_command(std::env::args_os()));
}
