fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    std::process::exit(persona_pong::cli::run_from_args(std::env::args().collect()));
}
