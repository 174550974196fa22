fn main() -> std::process::ExitCode {
    logshift::cli::main()
}
