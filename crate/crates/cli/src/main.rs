use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use offgrid::harness::{self, RunOptions, Scenario};
use offgrid::metrics::to_db;
use offgrid::Error;

/// Monte-Carlo driver for off-grid channel and covariance estimation.
#[derive(Parser)]
#[command(name = "offgrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write per-trial rows as CSV.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the bundled scenarios for one result figure.
    Sweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=9))]
        figure: u8,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Print the default scenario as JSON.
    Template,
}

#[derive(Args)]
struct RunArgs {
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write 0 in the wall_ms column so output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Print per-point means to stderr.
    #[arg(long)]
    summary: bool,
}

impl RunArgs {
    fn apply(&self, s: &mut Scenario) {
        if let Some(t) = self.trials {
            s.trials = t;
        }
        if let Some(seed) = self.seed {
            s.base_seed = seed;
        }
        if self.no_timing {
            s.record_timing = false;
        }
    }
}

fn execute(mut scenarios: Vec<Scenario>, args: &RunArgs) -> offgrid::Result<()> {
    for s in &mut scenarios {
        args.apply(s);
        s.validate()?;
    }
    let opts = RunOptions { threads: args.threads };
    let mut rows = Vec::new();
    for s in &scenarios {
        rows.extend(harness::run_scenario(s, &opts)?);
    }
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            harness::write_csv(&mut w, &rows)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            harness::write_csv(&mut w, &rows)?;
            w.flush()?;
        }
    }
    if args.summary {
        eprintln!("algorithm,T,snr_db,mrf_nrf,trials,nmse_h_db,nmse_c_db,eta");
        for r in harness::summarize(&rows) {
            eprintln!(
                "{},{},{},{},{},{:.3},{:.3},{:.4}",
                r.algorithm,
                r.snapshots,
                r.snr_db,
                r.mrf_nrf,
                r.trials,
                to_db(r.nmse_h_mean),
                to_db(r.nmse_c_mean),
                r.eta_mean
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, run } => Scenario::load(&scenario).and_then(|s| execute(vec![s], &run)),
        Command::Sweep { figure, run } => harness::preset(figure).and_then(|s| execute(s, &run)),
        Command::Validate { scenario } => Scenario::load(&scenario).map(|s| {
            println!("ok: {} ({} sweep points, {} trials)", s.id, s.sweep_points().len(), s.trials);
        }),
        Command::Template => {
            println!("{}", Scenario::default().to_json());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
