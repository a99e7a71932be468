fn main() {
    std::process::exit(mobilis_cli::run(std::env::args_os()));
}
