fn main() -> std::process::ExitCode {
    mobo_pc::cli::main()
}
