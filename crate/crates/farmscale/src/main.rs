use clap::Parser;
use farmscale::cli::{error_line, execute, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(e) = execute(cli, &mut out) {
        eprintln!("{}", error_line(&e));
        std::process::exit(e.exit_code());
    }
}
