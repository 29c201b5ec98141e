use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use an2n::agents::Algo;
use an2n::envs::EnvKind;
use an2n::harness::selftest::{self, SelftestHooks};
use an2n::harness::{
    collect_metrics, random_policy_returns, run_training_observed, write_metrics, write_report, EvalOutcome,
    MetricsRecord, RunConfig, RunObserver,
};

#[derive(Parser)]
#[command(name = "an2n", version, about = "Similarity-gated exploration for DDPG and SAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training run and write its per-epoch metrics CSV.
    Train(TrainArgs),
    /// Merge metrics files into summary.csv and learning-curve SVGs.
    Report {
        /// Directories holding metrics CSVs.
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle suites.
    Selftest {
        /// Feed a cosine similarity with a flipped numerator sign through
        /// the suites, which should then fail.
        #[arg(long)]
        inject_cosine_sign_flip: bool,
    },
    /// Mean and spread of episode returns under uniform random actions.
    Baseline {
        #[arg(long, default_value = "pendulum")]
        env: String,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long, value_enum)]
    an2n: Option<Switch>,
    #[arg(long)]
    env: Option<String>,
    /// Output directory for `<run_id>.csv` and `<run_id>.cfg`.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

struct Progress {
    records: Vec<MetricsRecord>,
    quiet: bool,
}

impl RunObserver for Progress {
    fn on_epoch(&mut self, r: &MetricsRecord, _eval: &EvalOutcome) {
        if !self.quiet {
            eprintln!(
                "{} epoch {:>3} step {:>7}  return {:>10.2} ± {:<8.2} key {:.3}  thr {:.3}  fifo {:>2}  loss {:.4}",
                r.run_id,
                r.epoch,
                r.step,
                r.eval_return_mean,
                r.eval_return_std,
                r.key_fraction,
                r.sim_threshold,
                r.fifo_len,
                r.critic_loss
            );
        }
        self.records.push(r.clone());
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let TrainArgs { config, seed, algo, an2n, env, out, overrides, quiet } = args;
    let mut cfg = match &config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(a) = algo {
        cfg.algo = a.parse::<Algo>()?;
    }
    if let Some(sw) = an2n {
        cfg.an2n = matches!(sw, Switch::On);
    }
    if let Some(e) = env {
        cfg.env = e.parse::<EnvKind>()?;
    }
    for kv in &overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("override `{kv}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let id = cfg.run_id();
    let cfg_path = out.join(format!("{id}.cfg"));
    std::fs::write(&cfg_path, cfg.to_text()).with_context(|| format!("writing {}", cfg_path.display()))?;
    let csv_path = out.join(format!("{id}.csv"));

    let mut progress = Progress { records: Vec::new(), quiet };
    let result = run_training_observed(&cfg, &mut progress);
    write_metrics(&progress.records, &csv_path)?;
    match result {
        Ok(_) => {
            eprintln!("wrote {}", csv_path.display());
            Ok(())
        }
        Err(e) => Err(anyhow::Error::new(e).context(format!(
            "run {id} aborted after {} epochs; partial metrics in {}",
            progress.records.len(),
            csv_path.display()
        ))),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => {
            train(args)?;
            Ok(true)
        }
        Command::Report { inputs, out } => {
            let records = collect_metrics(&inputs)?;
            for path in write_report(&records, &out)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Selftest { inject_cosine_sign_flip } => {
            let hooks = if inject_cosine_sign_flip {
                SelftestHooks { cosine: selftest::cosine_sign_flipped }
            } else {
                SelftestHooks::default()
            };
            let results = selftest::run_all(&hooks);
            print!("{}", selftest::format_table(&results));
            let ok = selftest::all_passed(&results);
            println!("{}", if ok { "all suites passed" } else { "selftest FAILED" });
            Ok(ok)
        }
        Command::Baseline { env, episodes, seed } => {
            let kind: EnvKind = env.parse()?;
            let out = random_policy_returns(kind, episodes, seed)?;
            let se = out.std / (episodes as f64).sqrt();
            println!(
                "{kind}: {episodes} random-action episodes, mean {:.3}, std {:.3}, std error {:.3}",
                out.mean, out.std, se
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
