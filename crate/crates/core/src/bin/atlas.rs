fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let code = mimetic_atlas::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
