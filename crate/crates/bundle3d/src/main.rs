fn main() -> std::process::ExitCode {
    bundle3d::cli::main()
}
