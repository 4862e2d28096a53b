fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("JOP_LOG")).init();
    std::process::exit(jop::cli::run_from(std::env::args_os()));
}
