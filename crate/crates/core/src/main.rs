fn main() {
    std::process::exit(spde_density::cli::run(std::env::args_os()));
}
