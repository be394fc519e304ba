fn main() -> std::process::ExitCode {
    ap_semigroup::cli::main()
}
