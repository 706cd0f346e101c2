fn main() {
    std::process::exit(mapmom_cli::main_with(std::env::args().collect()));
}
