use clap::Parser;
use esar_cli::{run, Cli, ConfigError, Context};

fn main() {
    let cli = Cli::parse();
    match run(cli, &Context::default()) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<ConfigError>().is_some() { 3 } else { 2 };
            std::process::exit(code);
        }
    }
}
