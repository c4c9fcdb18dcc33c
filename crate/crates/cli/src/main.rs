fn main() {
    let code = heatlab_cli::app::run_from(std::env::args_os());
    std::process::exit(code);
}
