use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sha2::{Digest, Sha256};

use fgl::config::{RunConfig, SEED_ENV};
use fgl::error::{Error, Result};
use fgl::minicnn::{load_checkpoint, save_checkpoint};
use fgl::oracle::{counterexample, run_oracle, OracleTrial};
use fgl::pipeline::{
    generate_dataset, read_dataset, run_benchmark, train_variant_with, write_dataset, write_loss_log, write_report,
    Contender, Ensemble, ModelId, TrainingPair, Variant,
};
use fgl::spectra::Metric;

const USAGE_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

/// Sample Fréchet mean estimation for graphs with a miniature U-Net.
#[derive(Parser, Debug)]
#[command(name = "fgl", version)]
struct Cli {
    /// TOML run configuration; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed [config: seed; env: FGL_SEED]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for every core [config: threads]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate training datasets (one directory per ensemble)
    Gen(GenArgs),
    /// Train one network variant on generated datasets
    Train(TrainArgs),
    /// Evaluate networks and the naive baseline on held-out batches
    Eval(EvalArgs),
    /// Compare naive and medoid estimates against exhaustive search on tiny graphs
    Oracle(OracleArgs),
    /// Print the summary tables of an evaluation report
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Ensembles to generate: ier, sbm, pa or all
    #[arg(long, value_delimiter = ',', default_value = "all")]
    ensemble: Vec<String>,
    /// Output directory (single ensemble only) [default: <data_dir>/<ensemble>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// [config: paths.data_dir]
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Graphs per batch [config: gen.batch_size]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [config: gen.ier_draws]
    #[arg(long)]
    ier_draws: Option<usize>,
    /// Batches per IER and SBM parameter draw [config: gen.ier_batches_per_draw, gen.sbm_batches_per_draw]
    #[arg(long)]
    batches_per_draw: Option<usize>,
    /// [config: gen.sbm_draws_per_layout]
    #[arg(long)]
    sbm_draws_per_layout: Option<usize>,
    /// [config: gen.sbm_p_range]
    #[arg(long)]
    p_min: Option<f64>,
    /// [config: gen.sbm_p_range]
    #[arg(long)]
    p_max: Option<f64>,
    /// [config: gen.sbm_q_range]
    #[arg(long)]
    q_min: Option<f64>,
    /// [config: gen.sbm_q_range]
    #[arg(long)]
    q_max: Option<f64>,
    /// PA attachment counts [config: gen.pa_l_values]
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<usize>>,
    /// [config: gen.pa_batches_per_l]
    #[arg(long)]
    pa_batches_per_l: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// ier, sbm, pa or gen (gen trains on all three datasets)
    #[arg(long)]
    variant: String,
    /// [config: paths.data_dir]
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// [config: paths.checkpoint_dir]
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// [config: train.epochs]
    #[arg(long)]
    epochs: Option<usize>,
    /// Pairs per Adam step [config: train.batch_size]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [config: train.lr]
    #[arg(long)]
    lr: Option<f64>,
    /// Suppress per-epoch loss lines
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Models to score: any of ier, sbm, pa, gen, naive
    #[arg(long, value_delimiter = ',', default_value = "ier,sbm,pa,gen,naive")]
    models: Vec<String>,
    /// Test ensembles: ier, sbm, pa or all
    #[arg(long, value_delimiter = ',', default_value = "all")]
    ensemble: Vec<String>,
    /// [config: paths.checkpoint_dir]
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Report directory [config: paths.report_dir]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test batches per ensemble [config: eval.trials]
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Vertices (at most 6) [config: oracle.n]
    #[arg(long)]
    n: Option<usize>,
    /// [config: oracle.trials]
    #[arg(long)]
    trials: Option<usize>,
    /// Graphs per sample [config: oracle.sample_size]
    #[arg(long)]
    sample_size: Option<usize>,
    /// Constant edge probability [config: oracle.p]
    #[arg(long)]
    p: Option<f64>,
    /// hamming, adjacency or laplacian [config: oracle.metric]
    #[arg(long)]
    metric: Option<String>,
    /// Also score the sample {K3, K3, empty}
    #[arg(long)]
    counterexample: bool,
    /// Write per-trial objectives to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report directory [config: paths.report_dir]
    #[arg(long)]
    dir: Option<PathBuf>,
}

/// A validated command, ready to run.
enum Plan {
    Gen { ensembles: Vec<(Ensemble, PathBuf)> },
    Train { variant: Variant, quiet: bool },
    Eval { models: Vec<ModelId>, ensembles: Vec<Ensemble> },
    Oracle { counterexample: bool, csv: Option<PathBuf> },
    Report { dir: PathBuf },
}

fn parse_list<T>(items: &[String], all: &[T]) -> Result<Vec<T>>
where
    T: std::str::FromStr<Err = Error> + Copy + Ord,
{
    let mut out = Vec::new();
    for item in items {
        if item == "all" {
            out.extend_from_slice(all);
        } else {
            out.push(item.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn prepare(cli: Cli) -> Result<(RunConfig, Plan)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env_seed(std::env::var(SEED_ENV).ok().as_deref())?;
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.threads, cli.threads);

    let plan = match cli.command {
        Command::Gen(a) => {
            set(&mut cfg.paths.data_dir, a.data_dir);
            set(&mut cfg.gen.batch_size, a.batch_size);
            set(&mut cfg.gen.ier_draws, a.ier_draws);
            set(&mut cfg.gen.ier_batches_per_draw, a.batches_per_draw);
            set(&mut cfg.gen.sbm_batches_per_draw, a.batches_per_draw);
            set(&mut cfg.gen.sbm_draws_per_layout, a.sbm_draws_per_layout);
            set(&mut cfg.gen.sbm_p_range[0], a.p_min);
            set(&mut cfg.gen.sbm_p_range[1], a.p_max);
            set(&mut cfg.gen.sbm_q_range[0], a.q_min);
            set(&mut cfg.gen.sbm_q_range[1], a.q_max);
            set(&mut cfg.gen.pa_l_values, a.l);
            set(&mut cfg.gen.pa_batches_per_l, a.pa_batches_per_l);
            let ensembles = parse_list(&a.ensemble, &Ensemble::ALL)?;
            if a.out.is_some() && ensembles.len() != 1 {
                return Err(Error::param("out", "--out needs exactly one --ensemble"));
            }
            let ensembles = ensembles
                .into_iter()
                .map(|e| {
                    let dir = a.out.clone().unwrap_or_else(|| cfg.paths.data_dir.join(e.name()));
                    (e, dir)
                })
                .collect();
            Plan::Gen { ensembles }
        }
        Command::Train(a) => {
            set(&mut cfg.paths.data_dir, a.data_dir);
            set(&mut cfg.paths.checkpoint_dir, a.checkpoint_dir);
            set(&mut cfg.train.epochs, a.epochs);
            set(&mut cfg.train.batch_size, a.batch_size);
            set(&mut cfg.train.lr, a.lr);
            Plan::Train {
                variant: a.variant.parse()?,
                quiet: a.quiet,
            }
        }
        Command::Eval(a) => {
            set(&mut cfg.paths.checkpoint_dir, a.checkpoint_dir);
            set(&mut cfg.paths.report_dir, a.out);
            set(&mut cfg.eval.trials, a.trials);
            Plan::Eval {
                models: parse_list(&a.models, &ModelId::ALL)?,
                ensembles: parse_list(&a.ensemble, &Ensemble::ALL)?,
            }
        }
        Command::Oracle(a) => {
            set(&mut cfg.oracle.n, a.n);
            set(&mut cfg.oracle.trials, a.trials);
            set(&mut cfg.oracle.sample_size, a.sample_size);
            set(&mut cfg.oracle.p, a.p);
            if let Some(m) = a.metric {
                cfg.oracle.metric = m
                    .parse::<Metric>()
                    .map_err(|_| Error::param("metric", format!("unknown metric {m:?}")))?;
            }
            cfg.oracle.validate()?;
            Plan::Oracle {
                counterexample: a.counterexample,
                csv: a.csv,
            }
        }
        Command::Report(a) => Plan::Report {
            dir: a.dir.unwrap_or_else(|| cfg.paths.report_dir.clone()),
        },
    };
    cfg.validate()?;
    Ok((cfg, plan))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn checkpoint_path(cfg: &RunConfig, variant: Variant) -> PathBuf {
    cfg.paths.checkpoint_dir.join(format!("{}.ckpt", variant.id()))
}

fn execute(cfg: &RunConfig, plan: Plan) -> Result<()> {
    println!("seed={} config_sha256={}", cfg.seed, cfg.digest());
    match plan {
        Plan::Gen { ensembles } => {
            let generated = ensembles
                .iter()
                .map(|(e, _)| generate_dataset(*e, &cfg.gen, cfg.seed))
                .collect::<Result<Vec<_>>>()?;
            for ((ensemble, dir), pairs) in ensembles.iter().zip(&generated) {
                write_dataset(dir, *ensemble, cfg.seed, &cfg.gen, pairs)?;
                println!("{ensemble}: {} pairs -> {}", pairs.len(), dir.display());
            }
        }
        Plan::Train { variant, quiet } => {
            let mut data = Vec::new();
            for ensemble in variant.training_ensembles() {
                let dir = cfg.paths.data_dir.join(ensemble.name());
                data.extend(TrainingPair::from_stored(&read_dataset(&dir)?)?);
            }
            println!("{variant}: training on {} pairs for {} epochs", data.len(), cfg.train.epochs);
            let outcome = train_variant_with(variant, &data, &cfg.train, cfg.seed, |epoch, loss| {
                if !quiet {
                    eprintln!("epoch {epoch}: mean loss {loss:.6}");
                }
            })?;
            let dir = &cfg.paths.checkpoint_dir;
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = checkpoint_path(cfg, variant);
            save_checkpoint(&path, &outcome.params, &outcome.adam)?;
            let log = dir.join(format!("{}_loss.csv", variant.id()));
            write_loss_log(&log, &outcome.epoch_losses)?;
            println!("checkpoint {} sha256={}", path.display(), sha256_file(&path)?);
            println!("loss log {}", log.display());
        }
        Plan::Eval { models, ensembles } => {
            let mut contenders = Vec::new();
            for model in &models {
                contenders.push(match model {
                    ModelId::Naive => Contender::Naive,
                    ModelId::Network(v) => {
                        let path = checkpoint_path(cfg, *v);
                        if !path.exists() {
                            return Err(Error::Missing {
                                what: "checkpoint",
                                path,
                            });
                        }
                        let (params, _) = load_checkpoint(&path)?;
                        Contender::Network(*v, params.with_side(cfg.gen.n)?)
                    }
                });
            }
            let summaries = run_benchmark(&ensembles, &contenders, &cfg.gen, &cfg.eval, cfg.seed)?;
            for s in &summaries {
                println!(
                    "{} on {}: max mean abs error {:.6} at eigenvalue {}, mean KL {:.6}",
                    s.model.display_name(),
                    s.ensemble,
                    s.max_abs.value,
                    s.max_abs.index,
                    s.kl_mean
                );
            }
            for path in write_report(&cfg.paths.report_dir, &summaries)? {
                println!("wrote {}", path.display());
            }
        }
        Plan::Oracle { counterexample: demo, csv } => {
            let oc = &cfg.oracle;
            if demo {
                let t = OracleTrial::evaluate(0, fgl::ensembles::RngSeed::new(cfg.seed, 0), &counterexample(), Metric::Hamming)?;
                println!(
                    "sample {{K3, K3, empty}} (hamming): exhaustive objective {} < naive objective {}",
                    t.exhaustive, t.naive
                );
            }
            let report = run_oracle(oc, cfg.seed)?;
            println!(
                "n={} trials={} sample_size={} p={} metric={}",
                oc.n, oc.trials, oc.sample_size, oc.p, oc.metric
            );
            println!("naive agreement rate {:.4}", report.naive_agreement());
            println!("medoid agreement rate {:.4}", report.medoid_agreement());
            println!("mean objective gap naive {:.6}", report.mean_naive_gap());
            println!("mean objective gap medoid {:.6}", report.mean_medoid_gap());
            if let Some(path) = csv {
                let mut text = String::from("trial,stream,exhaustive,medoid,naive,worst_member\n");
                for t in &report.trials {
                    text.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        t.trial, t.seed.stream, t.exhaustive, t.medoid, t.naive, t.worst_member
                    ));
                }
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                println!("wrote {}", path.display());
            }
        }
        Plan::Report { dir } => {
            for k in 1..=5 {
                let path = dir.join(format!("summary_table{k}.csv"));
                if !path.exists() {
                    return Err(Error::Missing {
                        what: "summary table",
                        path,
                    });
                }
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                println!("Table {k}");
                for line in text.lines() {
                    let cells: Vec<&str> = line.split(',').collect();
                    println!("  {:<10} {:<14} {:>22} {:>9}", cells[0], cells.get(1).unwrap_or(&""), cells.get(2).unwrap_or(&""), cells.get(3).unwrap_or(&""));
                }
            }
        }
    }
    Ok(())
}

fn config_help(section: Option<&str>) -> String {
    let cfg = RunConfig::default();
    let body = match section {
        None => cfg.to_toml(),
        Some(name) => {
            let value = toml::Value::try_from(&cfg).expect("config converts");
            let table = value.get(name).cloned().unwrap_or(toml::Value::Table(Default::default()));
            let mut wrapped = toml::map::Map::new();
            wrapped.insert(name.to_string(), table);
            toml::to_string(&wrapped).expect("section serializes")
        }
    };
    format!("Configuration fields and defaults (--config FILE):\n\n{}", body.trim_end())
}

fn command() -> clap::Command {
    let mut cmd = Cli::command().after_help(config_help(None));
    for (name, section) in [
        ("gen", "gen"),
        ("train", "train"),
        ("eval", "eval"),
        ("oracle", "oracle"),
        ("report", "paths"),
    ] {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(config_help(Some(section))));
    }
    cmd
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let (cfg, plan) = match prepare(cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    }
    match execute(&cfg, plan) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}
