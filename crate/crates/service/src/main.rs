use clap::Parser;

use biaslens::cli::{render, run, Cli};

fn main() {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            if json {
                let mut v = serde_json::to_value(&out).expect("outcome serializes");
                v["ok"] = serde_json::Value::Bool(true);
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else {
                print!("{}", render(&out));
            }
        }
        Err(e) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&e.to_json()).expect("json"));
            } else {
                eprintln!("error: {e}");
            }
            std::process::exit(e.exit_code());
        }
    }
}
