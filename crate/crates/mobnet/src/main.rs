fn main() {
    std::process::exit(mobnet::cli::main_with(std::env::args_os()));
}
