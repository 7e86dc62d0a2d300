use std::process::ExitCode;

fn main() -> ExitCode {
    forest_link::tool::cli::main()
}
