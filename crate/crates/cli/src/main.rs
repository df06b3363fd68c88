use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgdlab::harness::output::{record_to_string, sweep_summary_to_string, verify_report_to_string, write_record};
use sgdlab::harness::{plan_sweep, run_experiment, run_oracle, run_sweep, verify_suite, ExperimentConfig, ExperimentRecord, Format, Selector};
use sgdlab::Error;

const VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "sgdlab", version, about = "SGD experiments for functional linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replications of one experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run every point of a sweep file.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run deterministic property suites: lemma6, lemmaA1, theorem5, oracle or all.
    Verify {
        selector: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Evaluate an experiment with the exact moment recursion.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args)]
struct Opts {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of replications.
    #[arg(long)]
    replications: Option<u64>,
    /// Write results into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

impl Opts {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.replications {
            cfg.replications = n;
        }
    }

    fn load(&self, path: &Path) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(path)?;
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, name: &str, text: String) -> Result<(), Error> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(name);
                std::fs::write(&path, text)?;
                eprintln!("wrote {}", path.display());
            }
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn write(rec: &ExperimentRecord, opts: &Opts) -> Result<u8, Error> {
    match &opts.out {
        Some(dir) => {
            let path = write_record(rec, dir, opts.format.into())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", record_to_string(rec, opts.format.into())?),
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { config, opts } => {
            let cfg = opts.load(&config)?;
            let rec = run_experiment(&cfg, opts.threads)?;
            for note in &rec.notes {
                eprintln!("note: {note}");
            }
            write(&rec, &opts)
        }
        Command::Oracle { config, opts } => {
            let cfg = opts.load(&config)?;
            write(&run_oracle(&cfg)?, &opts)
        }
        Command::Sweep { config, opts } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            let plan = plan_sweep(&text, |c| opts.apply(c))?;
            eprintln!("{} points, {:.3e} coordinate updates", plan.points.len(), plan.work());
            let res = run_sweep(&plan, opts.threads)?;
            let format: Format = opts.format.into();
            if let Some(dir) = &opts.out {
                for rec in &res.records {
                    write_record(rec, dir, format)?;
                }
            }
            let name = format!("{}-summary.{}", plan.id, format.extension());
            opts.emit(&name, sweep_summary_to_string(&res.summary, format)?)?;
            Ok(0)
        }
        Command::Verify { selector, opts } => {
            let selector: Selector = selector.parse()?;
            let report = verify_suite(selector);
            for c in report.failures() {
                eprintln!("FAIL {}: {} (measured {:e}, threshold {:e})", c.suite, c.name, c.measured, c.threshold);
            }
            let format: Format = opts.format.into();
            opts.emit(&format!("verify-{selector}.{}", format.extension()), verify_report_to_string(&report, format)?)?;
            let failed = report.failures().count();
            eprintln!("{} checks, {failed} failed", report.checks.len());
            Ok(if failed == 0 { 0 } else { VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
