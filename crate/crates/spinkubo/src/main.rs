fn main() -> std::process::ExitCode {
    spinkubo::cli::main_with_args(std::env::args_os())
}
