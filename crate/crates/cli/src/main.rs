fn main() {
    std::process::exit(hilsynth_cli::main_with(std::env::args_os()));
}
