mod config;
mod grid;
mod output;
mod run;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Cli, RunConfig};
use run::{Failure, Output};

fn fail(f: Failure) -> ExitCode {
    eprintln!("error: {}", f.message());
    ExitCode::from(f.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (kind, flags) = cli.command.split();
    let cfg = match RunConfig::resolve(kind, flags) {
        Ok(c) => c,
        Err(m) => return fail(Failure::Input(m)),
    };
    if cfg.dry_run {
        println!("{}", cfg.describe());
        println!("points: {}", cfg.n_points());
        return ExitCode::SUCCESS;
    }
    // Open the destination first so a bad path fails before any work.
    let mut sink: Box<dyn Write> = match &cfg.out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => return fail(Failure::Input(format!("cannot write {}: {e}", path.display()))),
        },
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let result = run::run(&cfg);
    let (written, pass) = match result {
        Ok(Output::Table(t)) => (output::write_table(&mut sink, &cfg, &t), true),
        Ok(Output::Json(v)) => {
            let pass = v["pass"] != serde_json::json!(false);
            (output::write_json(&mut sink, &cfg, v), pass)
        }
        Err(f) => {
            drop(sink);
            if let Some(path) = &cfg.out {
                let _ = std::fs::remove_file(path);
            }
            return fail(f);
        }
    };
    if let Err(e) = written.and_then(|_| sink.flush()) {
        return fail(Failure::Input(format!("write failed: {e}")));
    }
    if pass {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: at least one oracle check failed");
        ExitCode::from(2)
    }
}
