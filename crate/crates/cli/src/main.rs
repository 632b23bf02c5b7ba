use clap::Parser;
use marrop_audit_cli::{run, Cli};

fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            // some errors already fold their source into their own message
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    if !msg.is_empty() {
                        msg += ": ";
                    }
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}
