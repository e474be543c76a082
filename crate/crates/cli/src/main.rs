use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rde_core::harness::write_file;
use rde_core::region::{min_slack, rco_lp, rco_partition_max};
use rde_core::{
    finest_dominant_partition, oracle_check, r_star, run_batch, run_ideal, run_sk_batch, BatchMode,
    Ground, Scenario, TrialBatch,
};

#[derive(Parser)]
#[command(name = "rde", version, about = "Universal omniscience and secret key agreement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum sum-rate by both routes, finest dominant partition, R* and slacks.
    Region(ScenarioArg),
    /// Fluid-limit trajectory as CSV.
    Ideal {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded runs of the hashing protocol.
    Exchange(RunArgs),
    /// Key agreement on top of the exchange.
    Sk {
        #[command(flatten)]
        run: RunArgs,
        /// Secrecy target δ.
        #[arg(long, default_value_t = 0.1)]
        dkey: f64,
    },
    /// Randomized cross-checks of the region identities.
    OracleCheck {
        /// Scenario whose pmf is checked alongside the random ones.
        #[arg(long)]
        scenario: Option<String>,
        /// Random instances per suite.
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One exchange batch per block length, written under `--out`.
    Batch {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Built-in name (ex1, ex2, ex3, twin, independent), optionally `name:q`, or a TOML file.
    #[arg(long, default_value = "ex1")]
    scenario: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "ex1")]
    scenario: String,
    /// Block length; a comma-separated list for `batch`.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Rate step; defaults to n^{-1/2}.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of trials.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// exact | genie | ideal
    #[arg(long, default_value = "genie")]
    mode: String,
    /// Decoder search effort per call.
    #[arg(long)]
    budget: Option<u64>,
    /// Check every run for hash collisions.
    #[arg(long)]
    monitor: bool,
    /// Output stem (exchange, sk) or directory (batch).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to every core.
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn batches(&self) -> Result<Vec<TrialBatch>> {
        let scenario = Scenario::resolve(&self.scenario)?;
        let ns: Vec<usize> = if self.n.is_empty() {
            vec![scenario.n.context("--n is required when the scenario has no n")?]
        } else {
            self.n.clone()
        };
        let mode: BatchMode = self.mode.parse()?;
        ns.into_iter()
            .map(|n| {
                let mut b = TrialBatch::new(scenario.clone(), n, self.seeds, mode);
                b.delta = self.delta;
                b.master_seed = self.seed;
                b.monitor = self.monitor;
                b.jobs = self.jobs;
                if let Some(budget) = self.budget {
                    b.search_budget = budget;
                }
                Ok(b)
            })
            .collect()
    }
}

fn region(arg: &str) -> Result<()> {
    let dist = Scenario::resolve(arg)?.distribution()?;
    let ground = Ground::parties(dist.parties());
    let (lp, lp_rates) = rco_lp(&dist, &ground)?;
    let (pm, arg) = rco_partition_max(&dist, &ground)?;
    let fdp = finest_dominant_partition(&dist, &ground, 1e-9)?;
    let rs = r_star(&dist, &ground)?;
    println!("R_CO (LP)             {lp:.9}");
    println!("R_CO (partition max)  {pm:.9}  at {arg}");
    println!("finest dominant       {fdp}");
    println!();
    println!("{:>6} {:>12} {:>12}", "party", "R*", "LP rate");
    for i in 0..dist.parties().len() {
        println!(
            "{:>6} {:>12.6} {:>12.6}",
            i + 1,
            rs.get(i).value().unwrap_or(f64::NAN),
            lp_rates.get(i).value().unwrap_or(f64::NAN)
        );
    }
    let rates = rs.values()?;
    let (slack, mask) = min_slack(&ground, &rates, 0.0, &rde_core::EntropyProfile::new(&dist, dist.parties())?);
    println!();
    println!("min slack of R*       {slack:.6}  at {}", ground.union_of(mask));
    Ok(())
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Region(s) => region(&s.scenario)?,
        Command::Ideal { scenario, out } => {
            let t = run_ideal(&Scenario::resolve(&scenario.scenario)?.distribution()?)?;
            match out {
                Some(p) => write_file(&p, &t.to_csv())?,
                None => print!("{}", t.to_csv()),
            }
            for v in &t.violations {
                eprintln!("validity: {v}");
            }
        }
        Command::Exchange(args) => {
            let batches = args.batches()?;
            if batches.len() != 1 {
                bail!("exchange takes one --n; use batch for several");
            }
            let s = run_batch(&batches[0])?;
            match &args.out {
                Some(stem) => s.write(stem)?,
                None => print!("{}", s.to_csv()?),
            }
            eprintln!(
                "{} trials: {} omniscience, {} declared, {} undetected, {} over budget",
                s.trials, s.successes, s.declared, s.undetected, s.resource_limited
            );
            return Ok(s.declared == 0);
        }
        Command::Sk { run, dkey } => {
            let batches = run.batches()?;
            if batches.len() != 1 {
                bail!("sk takes one --n");
            }
            let s = run_sk_batch(&batches[0], dkey)?;
            let json = s.to_json()?;
            match &run.out {
                Some(stem) => write_file(&stem.with_extension("json"), &json)?,
                None => println!("{json}"),
            }
        }
        Command::OracleCheck { scenario, seeds, seed, out } => {
            let extra = scenario.map(|s| Scenario::resolve(&s)?.distribution()).transpose()?;
            let ledger = oracle_check(extra.as_ref(), seeds, seed)?;
            for s in &ledger.suites {
                println!(
                    "{:<30} {:>5} checked  max dev {:.3e}  {}",
                    s.name,
                    s.checked,
                    s.max_deviation,
                    if s.passed() { "pass" } else { "FAIL" }
                );
            }
            if let Some(p) = out {
                write_file(&p, &serde_json::to_string_pretty(&ledger)?)?;
            }
            return Ok(ledger.passed());
        }
        Command::Batch { run } => {
            let dir = run.out.clone().unwrap_or_else(|| PathBuf::from("reports"));
            let mut all_ok = true;
            println!("scenario,n,delta,trials,successes,declared,undetected,over_budget,failure_rate,mean_excess,max_rounds,round_bound");
            for b in run.batches()? {
                let s = run_batch(&b)?;
                s.write(&dir.join(format!("{}_n{}_{}", s.scenario, s.n, run.mode)))?;
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    s.scenario,
                    s.n,
                    s.delta,
                    s.trials,
                    s.successes,
                    s.declared,
                    s.undetected,
                    s.resource_limited,
                    s.failure_rate,
                    s.mean_excess,
                    s.max_rounds,
                    s.round_bound
                );
                all_ok &= s.declared == 0;
            }
            return Ok(all_ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
