use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cohortscope::config::RunConfig;
use cohortscope::pipeline::{with_workers, Pipeline, PipelineError};

#[derive(Parser)]
#[command(
    name = "cohortscope",
    version,
    about = "Cohort selection, behavioral features and classification over a social media archive"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for intra-stage parallelism (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Ingest(IngestCmd),
    #[command(subcommand)]
    Cohort(CohortCmd),
    #[command(subcommand)]
    Hashtags(HashtagsCmd),
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Fit the model on the training split.
    Train,
    /// Hold-out metrics, baselines, cross-validation and per-group scores.
    Evaluate,
    /// Feature importance ranking.
    Importance,
    /// F1 against the number of top-ranked features.
    Curve,
    #[command(subcommand)]
    Topics(TopicsCmd),
    #[command(subcommand)]
    Synth(SynthCmd),
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum IngestCmd {
    /// Load the corpus and report referential problems.
    Validate,
}

#[derive(Subcommand)]
enum CohortCmd {
    /// Select the conspiracy cohort from the like matrix.
    Build {
        /// Also write the threshold grid.
        #[arg(long)]
        grid: bool,
    },
    /// Select the matched control group.
    Control,
}

#[derive(Subcommand)]
enum HashtagsCmd {
    /// Most used hashtags in the conspiracy cohort.
    Top,
}

#[derive(Subcommand)]
enum FeaturesCmd {
    /// Build the feature matrix for both cohorts.
    Extract,
}

#[derive(Subcommand)]
enum TopicsCmd {
    /// Hashtag co-occurrence graph of the conspiracy cohort.
    Graph,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Write a synthetic corpus with planted cohorts.
    Generate {
        /// Target directory; defaults to `<out>/corpus`.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Run every stage in order.
    Run,
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(anyhow::Error::msg)?,
        None => RunConfig::default(),
    };
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.rng_seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let workers = cfg.workers;
    // stages that only read earlier artifacts or write the corpus skip the input checks
    let p = match &cli.command {
        Command::Synth(_)
        | Command::Train
        | Command::Evaluate
        | Command::Importance
        | Command::Curve => Pipeline::settings_only(cfg)?,
        _ => Pipeline::new(cfg)?,
    };
    with_workers(workers, || dispatch(&p, cli.command))??;
    Ok(())
}

fn dispatch(p: &Pipeline, cmd: Command) -> std::result::Result<(), PipelineError> {
    match cmd {
        Command::Ingest(IngestCmd::Validate) => {
            let (counts, report) = p.ingest_validate()?;
            println!(
                "users {} tweets {} likes {} follows {} seeds {}",
                counts.users, counts.tweets, counts.likes, counts.follows, counts.seeds
            );
            println!(
                "dangling likes {} dangling follows {} retweets without author {} empty timelines {}",
                report.dangling_likes.len(),
                report.dangling_follows.len(),
                report.retweets_without_author.len(),
                report.empty_timelines.len()
            );
        }
        Command::Cohort(CohortCmd::Build { grid }) => {
            let c = p.cohort_build(grid)?;
            println!("conspiracy cohort: {} users", c.user_ids.len());
        }
        Command::Cohort(CohortCmd::Control) => {
            let c = p.cohort_control()?;
            println!("control group: {} users", c.user_ids.len());
        }
        Command::Hashtags(HashtagsCmd::Top) => {
            for (i, (tag, n)) in p.hashtags_top()?.iter().enumerate() {
                println!("{:>3} #{tag} {n}", i + 1);
            }
        }
        Command::Features(FeaturesCmd::Extract) => {
            let m = p.features_extract()?;
            println!("{} rows x {} features", m.n_rows(), m.n_cols());
        }
        Command::Train => {
            let e = p.train()?;
            println!(
                "{} trees, final training loss {:.6}",
                e.trees.len(),
                e.train_loss.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Evaluate => {
            let r = p.evaluate()?;
            println!(
                "holdout   P {:.3} R {:.3} F1 {:.3}",
                r.holdout.precision, r.holdout.recall, r.holdout.f1
            );
            println!("majority  F1 {:.3}", r.majority_baseline.f1);
            println!("random    F1 {:.3}", r.random_baseline.f1);
            println!(
                "{}-fold CV F1 {:.3} ± {:.3}",
                r.cross_validation.k, r.cross_validation.mean_f1, r.cross_validation.std_f1
            );
            for s in &r.feature_sets {
                println!(
                    "{:<17} ({:>3}) F1 {:.3}",
                    s.name, s.n_features, s.holdout.f1
                );
            }
        }
        Command::Importance => {
            for (rank, name, _, imp) in p.importance()?.iter().take(20) {
                println!("{rank:>3} {name:<40} {imp:.4}");
            }
        }
        Command::Curve => {
            for (k, f1) in p.curve()? {
                println!("{k:>3} {f1:.4}");
            }
        }
        Command::Topics(TopicsCmd::Graph) => {
            let (n, e) = p.topics_graph()?;
            println!("{n} nodes, {e} edges");
        }
        Command::Synth(SynthCmd::Generate { dir }) => {
            let dir = dir.unwrap_or_else(|| p.out_dir().join("corpus"));
            let truth = p.synth_generate(&dir)?;
            println!("{} users written to {}", truth.len(), dir.display());
        }
        Command::Pipeline(PipelineCmd::Run) => {
            let r = p.run_all()?;
            println!(
                "holdout F1 {:.3} (majority {:.3}, random {:.3})",
                r.holdout.f1, r.majority_baseline.f1, r.random_baseline.f1
            );
            println!("artifacts in {}", p.out_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()).context("cohortscope failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
