use clap::Parser;

use occond_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    if let Err(e) = run(cli) {
        if json_errors {
            eprintln!("{}", e.to_json());
        } else {
            eprintln!("error: {e}");
        }
        std::process::exit(e.exit_code());
    }
}
