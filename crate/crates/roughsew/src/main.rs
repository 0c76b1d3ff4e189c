fn main() {
    std::process::exit(roughsew::cli::run(std::env::args_os()));
}
