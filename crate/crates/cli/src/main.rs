mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;
use survey_core::SurveyError;

use config::{digest_file, Resolved, RunArgs};

/// Reconstruct sparse simple-survey responses with matrix factorization and
/// evaluate them against held-out pairwise comparisons.
#[derive(Parser)]
#[command(name = "simplesurvey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate respondents and write a dataset.
    Simulate(RunArgs),
    /// Fit a model on all training responses and write it as JSON.
    Fit(RunArgs),
    /// Cross-validate rank and penalty over a grid.
    Cv(RunArgs),
    /// Individual and aggregate held-out errors.
    Eval(RunArgs),
    /// Error versus number of training responses per respondent.
    Sweep(RunArgs),
    /// Item coordinates on the two leading latent dimensions.
    Embed(RunArgs),
    /// Response histogram and median block times.
    Summarize(RunArgs),
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn execute(command: Command) -> Result<(), SurveyError> {
    let (name, args, runner): (&'static str, RunArgs, fn(&Resolved, &std::path::Path) -> run::Outcome) = match command {
        Command::Simulate(a) => ("simulate", a, run::simulate),
        Command::Fit(a) => ("fit", a, run::fit),
        Command::Cv(a) => ("cv", a, run::cv),
        Command::Eval(a) => ("eval", a, run::eval),
        Command::Sweep(a) => ("sweep", a, run::sweep),
        Command::Embed(a) => ("embed", a, run::embed),
        Command::Summarize(a) => ("summarize", a, run::summarize_cmd),
    };
    let args = args.merged()?;
    let resolved = Resolved::new(name, &args);
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|source| SurveyError::Io { path: out.display().to_string(), source })?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(SurveyError::InvalidArgument("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| SurveyError::InvalidArgument(format!("thread pool: {e}")))?;
    let (written, result) = pool.install(|| runner(&resolved, &out))?;

    let inputs: Vec<_> = [&resolved.ratings, &resolved.comparisons, &resolved.model]
        .into_iter()
        .flatten()
        .map(|p| Ok(json!({ "path": p, "sha256": digest_file(p)? })))
        .collect::<Result<_, SurveyError>>()?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest_path = out.join(format!("{}.manifest.json", resolved.stem()));
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": resolved.seed,
        "config_hash": resolved.hash(),
        "config": resolved,
        "threads": args.threads,
        "inputs": inputs,
        "outputs": written,
        "result": result,
        "timestamp_unix": timestamp,
    });
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|source| SurveyError::Io { path: manifest_path.display().to_string(), source })?;
    println!("{}", json!({ "manifest": manifest_path, "outputs": written, "result": result }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
