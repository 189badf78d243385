fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MLT_LOG", "warn")).init();
    std::process::exit(mlt::cli::run(std::env::args_os()));
}
