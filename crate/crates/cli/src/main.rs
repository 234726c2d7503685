//! `nlcol`: reproduce the reference tables, run the verification suites and
//! execute study files.

mod config;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlcol::analysis::{convergence_study, ConvergenceTable};
use nlcol::tables::{run_table, table_spec, TableOutcome};
use nlcol::verify::{run_suite, Suite};
use rayon::prelude::*;

use crate::config::parse_study_file;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "nlcol", version, about = "Collocation studies for 1D/2D nonlocal diffusion")]
struct Cli {
    /// Write CSV here; without it CSV goes to stdout and the summary to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the randomized verification suites.
    #[arg(long, global = true, default_value_t = 20240601)]
    seed: u64,
    /// Write 0 in the `seconds` column so identical runs give identical files.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rerun a reference table and grade it against the printed values.
    ReproduceTable {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=7))]
        id: u8,
    },
    /// Run a verification suite: weights, matrix, oracle, truncation or all.
    Verify { suite: String },
    /// Run every study in a config file.
    Study { config: PathBuf },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<nlcol::Error> for Failure {
    fn from(e: nlcol::Error) -> Self {
        match e {
            nlcol::Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

const HEADER: [&str; 12] =
    ["scheme", "dim", "delta_rule", "beta", "h", "N", "error_inf", "rate", "solver", "iterations", "residual", "seconds"];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(out: Box<dyn Write>, tables: &[&ConvergenceTable], no_timing: bool) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for t in tables {
        for row in &t.rows {
            w.write_record([
                t.scheme.label().to_string(),
                t.dim.to_string(),
                t.rule.label(),
                sci(t.rule.beta()),
                sci(row.h),
                row.n.to_string(),
                sci(row.error_inf),
                row.rate.map(sci).unwrap_or_default(),
                row.solver.label().to_string(),
                row.iterations.to_string(),
                sci(row.residual),
                sci(if no_timing { 0.0 } else { row.seconds }),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV sink and the stream for human-readable output.
fn sinks(out: Option<&Path>) -> Result<(Box<dyn Write>, Box<dyn Write>), Failure> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?;
            Ok((Box::new(io::BufWriter::new(f)), Box::new(io::stdout())))
        }
        None => Ok((Box::new(io::stdout()), Box::new(io::stderr()))),
    }
}

fn print_table(log: &mut dyn Write, outcome: &TableOutcome) -> io::Result<()> {
    let spec = &outcome.spec;
    writeln!(log, "Table {}: {}", spec.id, spec.title)?;
    for col in &outcome.columns {
        writeln!(log, "  delta = {}", col.reference.rule)?;
        writeln!(log, "    {:>10} {:>6} {:>12} {:>12} {:>8} {:>8}", "h", "N", "error", "printed", "rate", "printed")?;
        for (k, row) in col.table.rows.iter().enumerate() {
            let printed = col.reference.errors.get(k).map_or("-".into(), |e| format!("{e:.4e}"));
            let rate = row.rate.map_or("-".into(), |r| format!("{r:.3}"));
            let printed_rate = k.checked_sub(1).and_then(|i| col.reference.rates.get(i)).map_or("-".into(), |r| format!("{r:.3}"));
            let bad = col.cells.iter().any(|c| c.row == k && c.pass == Some(false));
            writeln!(
                log,
                "    {:>10} {:>6} {:>12.4e} {:>12} {:>8} {:>8}{}",
                format!("1/{}", (1.0 / row.h).round()),
                row.n,
                row.error_inf,
                printed,
                rate,
                printed_rate,
                if bad { "  FAIL" } else { "" }
            )?;
        }
        if let Some(f) = &col.table.failure {
            writeln!(log, "    stopped: {f}")?;
        }
    }
    writeln!(log, "{}", if outcome.pass() { "PASS" } else { "FAIL" })
}

fn reproduce(cli: &Cli, id: u8) -> Result<bool, Failure> {
    let outcome = run_table(&table_spec(id)?)?;
    let (csv_out, mut log) = sinks(cli.out.as_deref())?;
    let tables: Vec<&ConvergenceTable> = outcome.columns.iter().map(|c| &c.table).collect();
    write_csv(csv_out, &tables, cli.no_timing)?;
    print_table(log.as_mut(), &outcome)?;
    Ok(outcome.pass())
}

fn verify(cli: &Cli, suite: &str) -> Result<bool, Failure> {
    let suite: Suite = suite.parse()?;
    let checks = run_suite(suite, cli.seed);
    let mut stdout = io::stdout().lock();
    for c in &checks {
        writeln!(stdout, "{c}")?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(stdout, "{}/{} checks pass (suite {}, seed {})", checks.len() - failed, checks.len(), suite.label(), cli.seed)?;
    if let Some(p) = &cli.out {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["suite", "check", "pass", "detail"])?;
        for c in &checks {
            w.write_record([c.suite, c.name.as_str(), if c.pass { "true" } else { "false" }, c.detail.as_str()])?;
        }
        w.flush()?;
    }
    Ok(failed == 0)
}

fn study(cli: &Cli, path: &Path) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let file = parse_study_file(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let results: Vec<_> = file.studies.par_iter().map(|s| convergence_study(&s.config)).collect();
    let tables = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let out = cli.out.clone().or(file.output.map(PathBuf::from));
    let (csv_out, mut log) = sinks(out.as_deref())?;
    write_csv(csv_out, &tables.iter().collect::<Vec<_>>(), cli.no_timing)?;

    let mut pass = true;
    for (s, t) in file.studies.iter().zip(&tables) {
        let rate = t.finest_rate();
        let verdict = match (s.expect_rate, rate) {
            _ if !t.is_complete() => {
                pass = false;
                format!("FAIL stopped: {}", t.failure.as_deref().unwrap_or("incomplete"))
            }
            (Some((want, tol)), Some(r)) => {
                let ok = (r - want).abs() <= tol;
                pass &= ok;
                format!("{} rate {r:.3} (expected {want} ± {tol})", if ok { "PASS" } else { "FAIL" })
            }
            (Some(_), None) => {
                pass = false;
                "FAIL single level has no rate".into()
            }
            (None, r) => format!("done, finest rate {}", r.map_or("-".into(), |r| format!("{r:.3}"))),
        };
        writeln!(log, "[{}] delta = {}: {verdict}", s.name, t.rule)?;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    }
    let result = match &cli.command {
        Command::ReproduceTable { id } => reproduce(&cli, *id),
        Command::Verify { suite } => verify(&cli, suite),
        Command::Study { config } => study(&cli, config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
