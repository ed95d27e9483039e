use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use codm_cli::{run_script, Flow, Format, Session};

#[derive(Parser)]
#[command(name = "codm", version, about = "Concept-oriented database shell")]
struct Cli {
    /// Output format: table, csv or jsonl.
    #[arg(long, global = true, env = "CODM_FORMAT", default_value = "table")]
    format: Format,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive prompt (the default).
    Repl,
    /// Execute a script file line by line.
    Run { script: PathBuf },
    /// Evaluate one query against a snapshot.
    Query {
        #[arg(short = 'd', long = "db")]
        snapshot: PathBuf,
        query: String,
    },
}

fn repl(format: Format) -> Result<()> {
    let mut session = Session::new(format);
    session.echo = true;
    let interactive = io::stdin().is_terminal();
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    loop {
        if interactive {
            write!(stdout, "codm> ")?;
            stdout.flush()?;
        }
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let mut out = String::new();
        let flow = session.execute(&line, &mut out);
        write!(stdout, "{out}")?;
        match flow {
            Ok(Flow::Quit) => break,
            Ok(Flow::Continue) => {}
            Err(e) => writeln!(stdout, "error: {e:#}")?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command.unwrap_or(Command::Repl) {
        Command::Repl => repl(cli.format),
        Command::Run { script } => (|| {
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let mut session = Session::new(cli.format);
            let mut out = String::new();
            let result = run_script(&mut session, &text, &mut out);
            print!("{out}");
            result
        })(),
        Command::Query { snapshot, query } => (|| {
            let text =
                std::fs::read_to_string(&snapshot).with_context(|| format!("reading {}", snapshot.display()))?;
            let mut session = Session::with_database(codm::snapshot::load(&text)?, cli.format);
            let mut out = String::new();
            session.execute(&query, &mut out)?;
            print!("{out}");
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
