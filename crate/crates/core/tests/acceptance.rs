//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits nonzero when any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{connected_by_union_find, gradient_check, jacobi_eigenvalues, random_graph, random_symmetric};
use fgl::ensembles::{is_connected, sample_beta_p, sample_ier, sample_pa, sample_sbm, PaParams, RngSeed, SbmParams};
use fgl::oracle::{counterexample, run_oracle, OracleConfig, OracleTrial};
use fgl::pipeline::*;
use fgl::spectra::sym_eigenvalues;
use fgl::Metric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
/// Epochs of the shared desk-scale run. Measured on one core this takes
/// about 13 minutes for all four variants.
const DESK_EPOCHS: usize = 20;
const DESK_BUDGET: Duration = Duration::from_secs(45 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn eigensolver() -> Outcome {
    let start = Instant::now();
    let n = 28;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst, mut worst_trace, mut worst_frob) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..500 {
        let m = random_symmetric(n, &mut rng);
        let mut got = sym_eigenvalues(&m).unwrap();
        got.sort_by(f64::total_cmp);
        let want = jacobi_eigenvalues(&m);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        worst_trace = worst_trace.max((got.iter().sum::<f64>() - m.trace()).abs());
        worst_frob = worst_frob.max((got.iter().map(|v| v * v).sum::<f64>() - m.frobenius_sq()).abs());
    }
    let (fast, time) = within(start, Duration::from_secs(10));
    let id_tol = 1e-8 * n as f64;
    outcome(
        worst < 1e-8 && worst_trace < id_tol && worst_frob < id_tol && fast,
        format!("max |dev| {worst:.1e}, trace {worst_trace:.1e}, frobenius {worst_frob:.1e}, {time}"),
    )
}

fn pseudometric() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut failures = Vec::new();
    let mut worst_slack = f64::NEG_INFINITY;
    for metric in [Metric::Hamming, Metric::AdjacencySpectral, Metric::LaplacianSpectral] {
        for _ in 0..1000 {
            let mut draw = || {
                let p = rng.gen_range(0.0..1.0);
                random_graph(28, p, &mut rng)
            };
            let (a, b, c) = (draw(), draw(), draw());
            let d = |x, y| metric.distance(x, y).unwrap();
            let (ab, ba, ac, cb) = (d(&a, &b), d(&b, &a), d(&a, &c), d(&c, &b));
            worst_slack = worst_slack.max(ab - ac - cb);
            if d(&a, &a) != 0.0 || ab != ba || ab < 0.0 || ab > ac + cb + 1e-9 {
                failures.push(metric);
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(30));
    outcome(
        failures.is_empty() && fast,
        format!("{} violations, worst triangle slack {worst_slack:.1e}, {time}", failures.len()),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let (err, count) = gradient_check(8, 4, SEED, 1e-5);
    let (fast, time) = within(start, Duration::from_secs(60));
    outcome(err < 1e-4 && fast, format!("{count} parameters, max relative error {err:.2e}, {time}"))
}

fn oracle() -> Outcome {
    let start = Instant::now();
    let cfg = OracleConfig {
        n: 4,
        trials: 100,
        ..OracleConfig::default()
    };
    let report = run_oracle(&cfg, SEED).unwrap();
    let ordered = report
        .trials
        .iter()
        .filter(|t| t.exhaustive <= t.medoid && t.medoid <= t.worst_member)
        .count();
    let demo = OracleTrial::evaluate(0, RngSeed::new(SEED, 0), &counterexample(), Metric::Hamming).unwrap();
    let (fast, time) = within(start, Duration::from_secs(5));
    outcome(
        ordered == 100 && demo.exhaustive == 2.0 && demo.naive == 3.0 && fast,
        format!(
            "{ordered}/100 ordered, counterexample exhaustive {} vs naive {}, {time}",
            demo.exhaustive, demo.naive
        ),
    )
}

fn generators() -> Outcome {
    let start = Instant::now();
    let n = 28;
    let root = RngSeed::new(SEED, 77);
    let mut notes = Vec::new();
    let mut pass = true;

    // IER: per-edge frequency over many draws against P. With 378 edges a
    // handful of 3-sigma exceedances is expected by chance, so the rate is
    // compared with its nominal 0.27% and nothing may pass 5 sigma.
    let mut rng = root.fork(1).rng();
    let params = sample_beta_p(2.0, 3.0, n, &mut rng).unwrap();
    let draws = 4000;
    let mut counts = vec![0usize; n * n];
    for _ in 0..draws {
        let g = sample_ier(&params, &mut rng);
        for i in 0..n {
            for j in i + 1..n {
                counts[i * n + j] += usize::from(g.has_edge(i, j));
            }
        }
    }
    let (mut beyond3, mut worst_z, mut edges) = (0usize, 0.0f64, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let p = params.probabilities().get(i, j);
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = counts[i * n + j] as f64 / draws as f64;
            let z = if sigma > 0.0 { (freq - p).abs() / sigma } else { (freq - p).abs() * 1e12 };
            beyond3 += usize::from(z > 3.0);
            worst_z = worst_z.max(z);
            edges += 1;
        }
    }
    let rate = beyond3 as f64 / edges as f64;
    pass &= rate <= 0.01 && worst_z < 5.0;
    notes.push(format!("IER {beyond3}/{edges} edges beyond 3 sigma (max z {worst_z:.2})"));

    let mut rng = root.fork(2).rng();
    let mut pa_ok = true;
    for l in [1, 5, 7, 10, 12, 15, 17, 20, 22, 25, 26] {
        let p = PaParams::new(l, n).unwrap();
        for _ in 0..50 {
            pa_ok &= sample_pa(&p, &mut rng).edge_count() == l * (n - l);
        }
    }
    pass &= pa_ok;
    notes.push(format!("PA edge counts exact: {pa_ok}"));

    let mut rng = root.fork(3).rng();
    let mut sbm_ok = true;
    for layout in [vec![14, 14], vec![10, 10, 8]] {
        for &(p, q) in &[(0.5, 0.01), (0.9, 0.5), (0.6, 0.05)] {
            let params = SbmParams::new(layout.clone(), p, q).unwrap();
            for _ in 0..100 {
                let g = sample_sbm(&params, &mut rng, 1000).unwrap();
                sbm_ok &= connected_by_union_find(&g) && is_connected(&g);
            }
        }
    }
    pass &= sbm_ok;
    notes.push(format!("SBM connected: {sbm_ok}"));

    let cfg = GenConfig::default();
    let mut deterministic = true;
    for e in Ensemble::ALL {
        deterministic &= generate_dataset(e, &cfg, SEED).unwrap() == generate_dataset(e, &cfg, SEED).unwrap();
    }
    pass &= deterministic;
    notes.push(format!("seeded determinism: {deterministic}"));

    let (fast, time) = within(start, Duration::from_secs(60));
    outcome(pass && fast, format!("{}, {time}", notes.join("; ")))
}

struct DeskRun {
    summaries: Vec<EvalSummary>,
    elapsed: Duration,
}

impl DeskRun {
    fn get(&self, ensemble: Ensemble, model: ModelId) -> &EvalSummary {
        self.summaries
            .iter()
            .find(|s| s.ensemble == ensemble && s.model == model)
            .expect("every model is scored on every ensemble")
    }
}

fn desk_run() -> DeskRun {
    let start = Instant::now();
    let gen = GenConfig::default();
    let data: Vec<Vec<TrainingPair>> = Ensemble::ALL
        .iter()
        .map(|&e| TrainingPair::from_pairs(&generate_dataset(e, &gen, SEED).unwrap()).unwrap())
        .collect();
    let cfg = TrainConfig {
        epochs: DESK_EPOCHS,
        ..TrainConfig::default()
    };
    let mut contenders = vec![Contender::Naive];
    for v in [Variant::Ier, Variant::Sbm, Variant::Pa, Variant::Gen] {
        let pairs: Vec<TrainingPair> = v
            .training_ensembles()
            .iter()
            .flat_map(|&e| data[Ensemble::ALL.iter().position(|&x| x == e).unwrap()].clone())
            .collect();
        let out = train_variant(v, &pairs, &cfg, SEED).unwrap();
        let first = out.epoch_losses[0];
        let last = *out.epoch_losses.last().unwrap();
        println!("  {} trained: loss {first:.4} -> {last:.4} ({:.0}s)", v.display_name(), start.elapsed().as_secs_f64());
        contenders.push(Contender::Network(v, out.params));
    }
    let summaries = run_benchmark(&Ensemble::ALL, &contenders, &gen, &EvalConfig::default(), SEED).unwrap();
    DeskRun {
        summaries,
        elapsed: start.elapsed(),
    }
}

fn ordering_on_ier(run: &DeskRun) -> Outcome {
    let net = run.get(Ensemble::Ier, ModelId::Network(Variant::Ier)).max_abs;
    let naive = run.get(Ensemble::Ier, ModelId::Naive).max_abs;
    let reduction = 1.0 - net.value / naive.value;
    let budget = run.elapsed < DESK_BUDGET;
    outcome(
        net.value < naive.value && budget,
        format!(
            "IER-Unet {:.4} (eig {}) vs Naive {:.4} (eig {}), reduction {:.1}% (target 25%), {:.0}s",
            net.value,
            net.index,
            naive.value,
            naive.index,
            100.0 * reduction,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn first_eigenvalue_wins(run: &DeskRun) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for e in Ensemble::ALL {
        let naive = run.get(e, ModelId::Naive).mean_abs[0];
        let best = [Variant::Ier, Variant::Sbm, Variant::Pa, Variant::Gen]
            .into_iter()
            .map(|v| (v, run.get(e, ModelId::Network(v)).mean_abs[0]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        pass &= best.1 < naive;
        notes.push(format!("{e}: {} {:.4} vs Naive {naive:.4}", best.0.display_name(), best.1));
    }
    outcome(pass, notes.join("; "))
}

fn kl_ordering(run: &DeskRun) -> Outcome {
    let gen = run.get(Ensemble::Ier, ModelId::Network(Variant::Gen)).kl_mean;
    let pa = run.get(Ensemble::Ier, ModelId::Network(Variant::Pa)).kl_mean;
    outcome(gen < pa, format!("Gen-Unet {gen:.4} vs PA-Unet {pa:.4}"))
}

fn cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_fgl"))
        .args(["--seed", "99"])
        .args(args)
        .current_dir(dir)
        .env_remove("FGL_SEED")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn pipeline_once(dir: &Path) -> Option<Vec<(String, Vec<u8>)>> {
    let steps: [&[&str]; 6] = [
        &[
            "gen", "--ier-draws", "2", "--batches-per-draw", "2", "--sbm-draws-per-layout", "1", "--l", "5,10",
            "--pa-batches-per-l", "2",
        ],
        &["train", "--variant", "ier", "--epochs", "2", "--quiet"],
        &["train", "--variant", "sbm", "--epochs", "2", "--quiet"],
        &["train", "--variant", "pa", "--epochs", "2", "--quiet"],
        &["train", "--variant", "gen", "--epochs", "2", "--quiet"],
        &["eval", "--trials", "6"],
    ];
    for step in steps {
        if !cli(dir, step) {
            println!("  step {step:?} failed");
            return None;
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.join("reports"))
        .ok()?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Some(files)
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (pipeline_once(a.path()), pipeline_once(b.path()));
    let (fast, time) = within(start, Duration::from_secs(600));
    match (ra, rb) {
        (Some(ra), Some(rb)) => {
            let same = ra == rb;
            outcome(same && ra.len() == 11 && fast, format!("{} report files, identical: {same}, {time}", ra.len()))
        }
        _ => outcome(false, "pipeline step failed"),
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    report("eigensolver vs Jacobi", eigensolver());
    report("pseudometric axioms", pseudometric());
    report("gradient check", gradients());
    report("oracle suite", oracle());
    report("generator statistics", generators());
    println!("  desk-scale run: {DESK_EPOCHS} epochs per variant, seed {SEED}");
    let run = desk_run();
    report("IER max mean spectral error beats naive", ordering_on_ier(&run));
    report("some variant beats naive at the first eigenvalue", first_eigenvalue_wins(&run));
    report("KL on IER: Gen-Unet below PA-Unet", kl_ordering(&run));
    report("determinism of gen/train/eval", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
