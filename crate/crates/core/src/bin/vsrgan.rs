fn main() {
    std::process::exit(vsrgan::commands::main_with_args(std::env::args_os()));
}
