use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use tasnet::cli::{self, commands, parse_override, RunConfig, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "tasnet", version, about = "Time-aware key-fragment sampling and hypergraph clustering")]
struct Cli {
    /// JSON file of flat dotted keys, e.g. {"select.k": 5}.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Preset to start from (default, toy).
    #[arg(long, global = true)]
    preset: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Any config key, as key=value. Repeatable; applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum LoocvArg {
    None,
    Subject,
}

#[derive(Args)]
struct Data {
    /// Dataset directory or manifest.json.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    loocv: Option<LoocvArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted fragments.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the agent and write a checkpoint and training log.
    Train {
        #[command(flatten)]
        data: Data,
        /// m1, m2, m3 or full.
        #[arg(long)]
        agent: Option<String>,
        /// r1 … r5.
        #[arg(long)]
        reward: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score trials with a trained model and extract key fragments.
    Select {
        #[command(flatten)]
        data: Data,
        /// Directory written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Sets both the left and right maximum offset.
        #[arg(long)]
        offset: Option<usize>,
    },
    /// Cluster trials and write metrics.
    Eval {
        #[command(flatten)]
        data: Data,
        /// fragments.json, or the directory written by `select`.
        #[arg(long)]
        fragments: Option<PathBuf>,
        #[arg(long, value_enum)]
        sampling: Option<OnOff>,
        /// hypergraph, simple_graph or pca_kmeans.
        #[arg(long)]
        method: Option<String>,
        /// trial or sample.
        #[arg(long)]
        granularity: Option<String>,
    },
    /// Run the agent × reward × offset grid and write one CSV row per cell.
    Ablate {
        #[command(flatten)]
        data: Data,
        /// Worker threads for grid cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn path(p: &Option<PathBuf>) -> Option<Value> {
    p.as_ref().map(|p| Value::String(p.to_string_lossy().into_owned()))
}

/// Flags as config overrides, in the order they take effect.
fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>> {
    let mut out: Vec<(String, Value)> = Vec::new();
    for o in &cli.overrides {
        out.push(parse_override(o)?);
    }
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            out.push((k.to_string(), v));
        }
    };
    put("preset", cli.preset.clone().map(Value::from));
    put("seed", cli.seed.map(Value::from));
    let data_flags = |d: &Data| {
        vec![
            ("paths.dataset", path(&d.data)),
            ("paths.out", path(&d.out)),
            (
                "eval.loocv",
                d.loocv.map(|l| match l {
                    LoocvArg::None => "none".into(),
                    LoocvArg::Subject => "subject".into(),
                }),
            ),
        ]
    };
    let flags: Vec<(&str, Option<Value>)> = match &cli.command {
        Command::Synth { out } => vec![("paths.out", path(out))],
        Command::Train { data, agent, reward, epochs } => {
            let mut f = data_flags(data);
            f.push(("agent.variant", agent.clone().map(Value::from)));
            f.push(("train.reward", reward.clone().map(Value::from)));
            f.push(("train.max_epochs", epochs.map(Value::from)));
            f
        }
        Command::Select { data, model, k, offset } => {
            let mut f = data_flags(data);
            f.push(("paths.model", path(model)));
            f.push(("select.k", k.map(Value::from)));
            f.push(("select.l_max", offset.map(Value::from)));
            f.push(("select.r_max", offset.map(Value::from)));
            f
        }
        Command::Eval { data, fragments, sampling, method, granularity } => {
            let mut f = data_flags(data);
            f.push(("paths.fragments", path(fragments)));
            f.push(("eval.sampling", sampling.map(|s| Value::Bool(matches!(s, OnOff::On)))));
            f.push(("cluster.method", method.clone().map(Value::from)));
            f.push(("cluster.granularity", granularity.clone().map(Value::from)));
            f
        }
        Command::Ablate { data, .. } => data_flags(data),
    };
    for (k, v) in flags {
        put(k, v);
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides(cli)?).context("invalid configuration")?;
    match &cli.command {
        Command::Synth { .. } => {
            let manifest = cli::cmd_synth(&cfg)?;
            println!("wrote {}", manifest.display());
        }
        Command::Train { .. } => {
            for ckpt in cli::cmd_train(&cfg)? {
                println!("wrote {}", ckpt.display());
            }
        }
        Command::Select { .. } => {
            let (scores, fragments) = cli::cmd_select(&cfg)?;
            println!("wrote {} and {}", scores.display(), fragments.display());
        }
        Command::Eval { .. } => {
            let metrics = cli::cmd_eval(&cfg)?;
            println!("wrote {}", metrics.display());
        }
        Command::Ablate { jobs, .. } => {
            let report = commands::cmd_ablate(&cfg, *jobs)?;
            println!("wrote {}", report.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
