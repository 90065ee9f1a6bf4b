fn main() {
    std::process::exit(relstab_cli::main_with_args(std::env::args_os()));
}
