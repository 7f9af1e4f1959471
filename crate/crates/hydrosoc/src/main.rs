fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYDROSOC_LOG", "warn")).init();
    std::process::exit(hydrosoc::cli::run(std::env::args_os()));
}
