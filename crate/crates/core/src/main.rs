use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    // Let clap print help, version and usage errors itself.
    let cli = match <deobfusc::cli::Cli as clap::Parser>::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match deobfusc::cli::run_cli(cli, &argv) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("deobfusc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
