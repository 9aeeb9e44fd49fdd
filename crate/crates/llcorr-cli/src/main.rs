use std::process::ExitCode;

use clap::Parser;

use llcorr_cli::acceptance::parse_ids;
use llcorr_cli::args::{Cli, Command, Common};
use llcorr_cli::commands::{self, fatal_record, Outcome};
use llcorr_cli::config::{base_defaults, RunConfig};
use llcorr_cli::Result;

fn run(command: Command) -> (&'static str, Result<Outcome>) {
    let resolve = |c: &Common, defaults| -> Result<RunConfig> { RunConfig::resolve(&defaults, &c.raw()?) };
    match command {
        Command::Thermo(c) => ("thermo", resolve(&c, base_defaults()).and_then(|cfg| commands::thermo(&cfg))),
        Command::Poles(c) => ("poles", resolve(&c, base_defaults()).and_then(|cfg| commands::poles(&cfg))),
        Command::Lengths(c) => ("lengths", resolve(&c, base_defaults()).and_then(|cfg| commands::lengths(&cfg))),
        Command::Amplitude(c) => ("amplitude", resolve(&c, base_defaults()).and_then(|cfg| commands::amplitude(&cfg))),
        Command::Oracle(c) => ("oracle", resolve(&c, commands::oracle_defaults()).and_then(|cfg| commands::oracle(&cfg))),
        Command::Verify { common, only } => (
            "verify",
            resolve(&common, base_defaults()).and_then(|cfg| {
                let ids = match only {
                    Some(s) => parse_ids(&s)?,
                    None => (1..=10).collect(),
                };
                commands::verify(&cfg, &ids, |line| println!("{line}"))
            }),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result) = run(cli.command);
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            if let Some(record) = out.error_record() {
                eprintln!("{record}");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", fatal_record(name, &e));
            ExitCode::from(2)
        }
    }
}
