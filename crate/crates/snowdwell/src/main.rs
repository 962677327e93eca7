fn main() -> std::process::ExitCode {
    snowdwell::cli::main_with(std::env::args_os())
}
