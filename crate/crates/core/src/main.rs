fn main() {
    std::process::exit(planspace::cli::run(std::env::args_os()));
}
