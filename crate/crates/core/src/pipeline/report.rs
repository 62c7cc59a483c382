use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_mean, threshold_half, Graph};
use crate::minicnn::ModelParams;

use super::dataset::{generate_test_set, DatasetPair, Ensemble, GenConfig};
use super::eval::{
    evaluate, mean_spectrum, predict_frechet_at, EvalInputs, EvalRecord, EvalSettings, EvalSummary, ModelId,
    BINARIZE_THRESHOLD, REL_EPSILON,
};
use crate::graph::KL_EPSILON;

pub const TABLE_HEADER: &str = "model,metric,value,eig_index";
pub const CURVE_HEADER: &str = "model,eig_index,mean_abs,mean_rel";
/// Absolute-error curves cover this many leading eigenvalues.
pub const CURVE_ABS_LEN: usize = 25;
/// Relative-error curves cover this many leading eigenvalues.
pub const CURVE_REL_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Test batches per ensemble.
    pub trials: usize,
    pub rel_epsilon: f64,
    pub kl_epsilon: f64,
    /// Network scores strictly above this become edges.
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            trials: 90,
            rel_epsilon: REL_EPSILON,
            kl_epsilon: KL_EPSILON,
            threshold: BINARIZE_THRESHOLD,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("eval.trials", "must be positive"));
        }
        if !(self.rel_epsilon > 0.0 && self.rel_epsilon.is_finite()) {
            return Err(Error::param("eval.rel_epsilon", "must be positive and finite"));
        }
        if !(self.kl_epsilon > 0.0 && self.kl_epsilon < 1.0) {
            return Err(Error::param("eval.kl_epsilon", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::param("eval.threshold", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            rel_epsilon: self.rel_epsilon,
            kl_epsilon: self.kl_epsilon,
        }
    }
}

/// An estimator entered in the benchmark: the naive baseline, or a network
/// with its parameters.
#[derive(Clone, Debug)]
pub enum Contender {
    Naive,
    Network(super::train::Variant, ModelParams<f32>),
}

impl Contender {
    pub fn id(&self) -> ModelId {
        match self {
            Contender::Naive => ModelId::Naive,
            Contender::Network(v, _) => ModelId::Network(*v),
        }
    }

    fn estimate(&self, batch: &[Graph], cut: f64) -> Result<Graph> {
        match self {
            Contender::Naive => Ok(threshold_half(&sample_mean(batch)?)),
            Contender::Network(_, params) => predict_frechet_at(params, batch, cut),
        }
    }
}

/// Scores every contender on `test` (pairs of a single ensemble).
pub fn evaluate_contenders(
    ensemble: Ensemble,
    test: &[DatasetPair],
    contenders: &[Contender],
    cfg: &EvalConfig,
) -> Result<Vec<Vec<EvalRecord>>> {
    let truths: Vec<Graph> = test.iter().map(|p| p.target.clone()).collect();
    let seeds: Vec<_> = test.iter().map(|p| p.meta.seed).collect();
    let mean_spectra = test
        .par_iter()
        .map(|p| mean_spectrum(&p.batch))
        .collect::<Result<Vec<_>>>()?;
    contenders
        .iter()
        .map(|c| {
            let estimates = test
                .par_iter()
                .map(|p| c.estimate(&p.batch, cfg.threshold))
                .collect::<Result<Vec<_>>>()?;
            let inputs = EvalInputs {
                estimates: &estimates,
                truths: &truths,
                mean_spectra: &mean_spectra,
                seeds: &seeds,
            };
            evaluate(c.id(), ensemble, inputs, &cfg.settings())
        })
        .collect()
}

/// Generates held-out batches for every ensemble and summarizes every
/// contender on them. Summaries come back ordered by ensemble, then model.
pub fn run_benchmark(
    ensembles: &[Ensemble],
    contenders: &[Contender],
    gen: &GenConfig,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<EvalSummary>> {
    cfg.validate()?;
    let mut ensembles = ensembles.to_vec();
    ensembles.sort();
    ensembles.dedup();
    let mut contenders = contenders.to_vec();
    contenders.sort_by_key(Contender::id);
    contenders.dedup_by_key(|c| c.id());

    let mut summaries = Vec::new();
    for ensemble in ensembles {
        let test = generate_test_set(ensemble, gen, cfg.trials, seed)?;
        for records in evaluate_contenders(ensemble, &test, &contenders, cfg)? {
            summaries.push(super::eval::summarize(&records)?);
        }
    }
    Ok(summaries)
}

fn of(summaries: &[EvalSummary], ensemble: Ensemble) -> impl Iterator<Item = &EvalSummary> {
    summaries.iter().filter(move |s| s.ensemble == ensemble)
}

fn table(rows: impl Iterator<Item = (ModelId, &'static str, f64, Option<usize>)>) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for (model, metric, value, index) in rows {
        let index = index.map(|i| i.to_string()).unwrap_or_default();
        writeln!(out, "{},{metric},{value},{index}", model.display_name()).expect("string write");
    }
    out
}

fn curve(summaries: &[EvalSummary], ensemble: Ensemble, versus_sample_mean: bool) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for s in of(summaries, ensemble) {
        let (abs, rel) = if versus_sample_mean {
            (&s.mean_abs_vs_sample_mean, &s.mean_rel_vs_sample_mean)
        } else {
            (&s.mean_abs, &s.mean_rel)
        };
        for i in 0..abs.len().min(CURVE_ABS_LEN) {
            let rel = if i < CURVE_REL_LEN { rel[i].to_string() } else { String::new() };
            writeln!(out, "{},{},{},{rel}", s.model.display_name(), i + 1, abs[i]).expect("string write");
        }
    }
    out
}

/// File name and contents of the five tables and six curve files.
pub fn render_report(summaries: &[EvalSummary]) -> Vec<(String, String)> {
    let kl = |e: Ensemble| {
        table(of(summaries, e).flat_map(|s| {
            [
                (s.model, "kl_mean", s.kl_mean, None),
                (s.model, "kl_variance", s.kl_variance, None),
            ]
        }))
    };
    let mut files = vec![
        (
            "summary_table1.csv".to_string(),
            table(of(summaries, Ensemble::Ier).flat_map(|s| {
                [
                    (s.model, "max_mean_abs", s.max_abs.value, Some(s.max_abs.index)),
                    (s.model, "min_mean_abs", s.min_abs.value, Some(s.min_abs.index)),
                ]
            })),
        ),
        (
            "summary_table2.csv".to_string(),
            table(of(summaries, Ensemble::Ier).flat_map(|s| {
                [
                    (s.model, "max_mean_rel", s.max_rel.value, Some(s.max_rel.index)),
                    (s.model, "min_mean_rel", s.min_rel.value, Some(s.min_rel.index)),
                ]
            })),
        ),
        ("summary_table3.csv".to_string(), kl(Ensemble::Ier)),
        ("summary_table4.csv".to_string(), kl(Ensemble::Sbm)),
        ("summary_table5.csv".to_string(), kl(Ensemble::Pa)),
    ];
    for (k, ensemble) in Ensemble::ALL.into_iter().enumerate() {
        files.push((format!("curves_fig{}.csv", 5 + 2 * k), curve(summaries, ensemble, false)));
        files.push((format!("curves_fig{}.csv", 6 + 2 * k), curve(summaries, ensemble, true)));
    }
    files
}

/// Writes the rendered report into `dir` and returns the written paths.
pub fn write_report(dir: &Path, summaries: &[EvalSummary]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    render_report(summaries)
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::train::Variant;

    fn small_gen() -> GenConfig {
        GenConfig {
            n: 8,
            batch_size: 3,
            sbm_layouts: vec![vec![4, 4]],
            pa_l_values: vec![2, 3],
            ..GenConfig::default()
        }
    }

    #[test]
    fn naive_only_report_has_every_file() {
        let cfg = EvalConfig {
            trials: 4,
            ..EvalConfig::default()
        };
        let summaries = run_benchmark(&Ensemble::ALL, &[Contender::Naive], &small_gen(), &cfg, 2).unwrap();
        assert_eq!(summaries.len(), 3);
        let files = render_report(&summaries);
        assert_eq!(files.len(), 11);
        let t1 = &files[0].1;
        assert_eq!(t1.lines().next(), Some(TABLE_HEADER));
        assert!(t1.lines().nth(1).unwrap().starts_with("Naive,max_mean_abs,"));
        let fig5 = &files[5];
        assert_eq!(fig5.0, "curves_fig5.csv");
        assert_eq!(fig5.1.lines().count(), 1 + 8);
        assert!(fig5.1.lines().nth(6).unwrap().ends_with(','));
    }

    #[test]
    fn contenders_are_ordered_and_deduplicated() {
        let params = ModelParams::<f32>::init(8, 2, crate::ensembles::RngSeed::new(1, 2)).unwrap();
        let contenders = [
            Contender::Naive,
            Contender::Network(Variant::Pa, params.clone()),
            Contender::Naive,
            Contender::Network(Variant::Ier, params),
        ];
        let cfg = EvalConfig {
            trials: 2,
            ..EvalConfig::default()
        };
        let s = run_benchmark(&[Ensemble::Ier], &contenders, &small_gen(), &cfg, 2).unwrap();
        let ids: Vec<_> = s.iter().map(|s| s.model).collect();
        assert_eq!(ids, vec![ModelId::Network(Variant::Ier), ModelId::Network(Variant::Pa), ModelId::Naive]);
        let rendered = render_report(&s);
        assert_eq!(rendered[0].1.lines().count(), 1 + 2 * 3);
        assert_eq!(rendered[3].1.lines().count(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        let bad = EvalConfig {
            trials: 0,
            ..EvalConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("eval.trials"));
    }
}
