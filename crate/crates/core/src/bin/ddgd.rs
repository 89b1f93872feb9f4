fn main() -> std::process::ExitCode {
    ddgd::cli::main()
}
