fn main() {
    std::process::exit(qpos_cli::main_with(std::env::args_os()));
}
