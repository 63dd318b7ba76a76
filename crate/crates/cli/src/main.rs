//! `cac`: command-line driver for the cough-audio screening pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use cac_core::dataset::{synth_dataset, SynthConfig};
use cac_core::experiment::{ensemble_run, eval_run, infer_run, train_run, ModelKind, RunConfig};
use cac_core::inference::{read_individual_csv, Aggregator};
use cac_core::triage::{lift_table, sweep};
use cac_core::{eval, Error};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cac", version, about = "Cough-audio COVID-19 screening toolkit")]
struct Cli {
    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic cough corpus with a manifest and noise bank.
    Synth(SynthArgs),
    /// Train all models on every cross-validation fold.
    Train(TrainArgs),
    /// Score validation individuals and summarise a training run.
    Eval(EvalArgs),
    /// Score a manifest with a saved conv-net checkpoint.
    Infer(InferArgs),
    /// Rank-average and stack out-of-fold prediction files.
    Ensemble(EnsembleArgs),
    /// Testing-capacity lift at given operating points and prevalences.
    Triage(TriageArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 120)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    pos_frac: f64,
    #[arg(long, env = "CAC_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    noise_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Network layout, e.g. conv16-pool-conv32-pool-conv64-gap-dense64-dropout0.5-dense2.
    #[arg(long)]
    net: Option<String>,
    /// Comma-separated subset of conv_ls, conv_nols, linear.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    aggregator: Option<String>,
    /// Disable noise mixing and masking.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    run: PathBuf,
    /// Use the stored prediction CSVs instead of re-scoring checkpoints.
    #[arg(long)]
    from_predictions: bool,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "max")]
    aggregator: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Per-individual prediction CSVs (`individual_id,indiv_prob,label`).
    #[arg(long = "pred", required = true, num_args = 1..)]
    predictions: Vec<PathBuf>,
    #[arg(long)]
    folds: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TriageArgs {
    #[arg(long)]
    sens: Option<f64>,
    #[arg(long)]
    spec: Option<f64>,
    /// Comma-separated prevalences in (0, 1).
    #[arg(long, value_delimiter = ',', required = true)]
    prev: Vec<f64>,
    /// Sweep every ROC point of a prediction CSV instead of a fixed operating point.
    #[arg(long, conflicts_with_all = ["sens", "spec"])]
    scores: Option<PathBuf>,
    /// Emit CSV instead of an aligned table.
    #[arg(long)]
    csv: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Synth(a) => {
            let cfg = SynthConfig { n_individuals: a.n, pos_frac: a.pos_frac, seed: a.seed, ..Default::default() };
            let path = synth_dataset(&cfg, &a.out)?;
            println!("{}", path.display());
        }
        Cmd::Train(a) => {
            let cfg = train_config(a)?;
            let m = train_run(&cfg)?;
            for (model, auc) in &m.auc_mean {
                println!("{model}: mean validation AUC {auc:.3}");
            }
            println!("wrote {}", cfg.out_dir.join("metrics.json").display());
        }
        Cmd::Eval(a) => {
            let s = eval_run(&a.run, a.from_predictions)?;
            for (name, m) in &s.models {
                println!("{name:<14} AUC {}  spec@90%sens {:.2}", m.auc_report, m.spec_at_90sens);
            }
            println!("wrote {}", a.run.join("summary.json").display());
        }
        Cmd::Infer(a) => {
            let agg: Aggregator = a.aggregator.parse()?;
            let scored = infer_run(&a.checkpoint, &a.manifest, agg, &a.out)?;
            println!("scored {} individuals into {}", scored.len(), a.out.display());
        }
        Cmd::Ensemble(a) => {
            let r = ensemble_run(&a.predictions, &a.folds, &a.out)?;
            for (name, auc) in &r.base_auc {
                println!("{name:<14} AUC {auc:.3}");
            }
            println!("{:<14} AUC {:.3}", "rank_ensemble", r.rank_auc);
            println!("{:<14} AUC {:.3}", "stacked", r.stacked_auc);
        }
        Cmd::Triage(a) => triage(a)?,
    }
    Ok(())
}

fn train_config(a: TrainArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(v) = a.manifest {
        cfg.manifest = v;
    }
    if let Some(v) = a.out {
        cfg.out_dir = v;
    }
    if let Some(v) = a.noise_dir {
        cfg.noise_dir = Some(v);
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.lr {
        cfg.train.lr0 = v;
    }
    if let Some(v) = a.momentum {
        cfg.train.momentum = v;
    }
    if let Some(v) = a.net {
        cfg.net = v;
    }
    if let Some(v) = a.models {
        cfg.models = v.iter().map(|m| m.parse::<ModelKind>()).collect::<Result<_, _>>()?;
    }
    if let Some(v) = a.aggregator {
        cfg.aggregator = v.parse()?;
    }
    if a.no_augment {
        cfg.augment.enabled = false;
    }
    cfg.propagate_seed();
    Ok(cfg)
}

fn triage(a: TriageArgs) -> Result<(), Error> {
    if let Some(path) = a.scores {
        let rows = read_individual_csv(&path)?;
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let curve = eval::roc(&scores, &labels)?;
        if a.csv {
            println!("prevalence,threshold,sensitivity,specificity,lift");
        }
        for &rho in &a.prev {
            let s = sweep(&curve, rho);
            let fmt_lift = |l: Option<f64>| l.map_or("inf".to_string(), |v| format!("{v:.4}"));
            if a.csv {
                for r in &s.rows {
                    println!("{rho},{},{},{},{}", r.threshold, r.sensitivity, r.specificity, fmt_lift(r.lift));
                }
            } else {
                let op = s.operating_point;
                println!(
                    "prevalence {:>5.1}%: threshold {:.4}  sens {:.2}  spec {:.2}  lift {}",
                    rho * 100.0,
                    op.threshold,
                    op.sensitivity,
                    op.specificity,
                    fmt_lift(op.lift)
                );
            }
        }
        return Ok(());
    }
    let (Some(sens), Some(spec)) = (a.sens, a.spec) else {
        return Err(Error::InvalidTriageParams("--sens and --spec are required unless --scores is given".into()));
    };
    let rows = lift_table(sens, spec, &a.prev).into_iter().collect::<Result<Vec<_>, _>>()?;
    if a.csv {
        println!("prevalence,sensitivity,specificity,lift,gain_percent");
        for r in &rows {
            println!("{},{sens},{spec},{:.4},{}", r.prevalence, r.lift, r.percent);
        }
    } else {
        println!("sensitivity {sens:.2}, specificity {spec:.2}");
        println!("{:>10}  {:>7}  {:>5}", "prevalence", "lift", "gain");
        for r in &rows {
            println!("{:>9.1}%  {:>7.4}  {:>+4}%", r.prevalence * 100.0, r.lift, r.percent);
        }
    }
    Ok(())
}
