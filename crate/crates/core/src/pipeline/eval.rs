use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensembles::RngSeed;
use crate::error::{Error, Result};
use crate::graph::{degree_histogram, kl_divergence_with, threshold_at, Graph, WeightedMatrix, KL_EPSILON};
use crate::minicnn::{ModelParams, Scalar, Tensor3};
use crate::spectra::adjacency_spectrum;

use super::dataset::Ensemble;
use super::train::Variant;

/// Floor on the denominator of relative eigenvalue errors.
pub const REL_EPSILON: f64 = 1e-8;
/// Relative-error extrema are taken over this many leading eigenvalues.
pub const REL_STATS_WINDOW: usize = 10;
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// Anything that maps a sample mean adjacency matrix to an edge-score matrix.
pub trait MatrixMap {
    fn map(&self, input: &WeightedMatrix) -> Result<WeightedMatrix>;
}

impl<T: Scalar> MatrixMap for ModelParams<T> {
    fn map(&self, input: &WeightedMatrix) -> Result<WeightedMatrix> {
        let n = input.n();
        if n != self.side() {
            return Err(Error::SizeMismatch {
                expected: self.side(),
                found: n,
            });
        }
        let x = Tensor3::new(n, n, 1, input.as_slice().iter().map(|&v| T::of(v)).collect())?;
        let y = self.predict(&x)?;
        WeightedMatrix::new(n, y.data().iter().map(|v| v.as_f64()).collect())
    }
}

/// Symmetrizes `scores`, drops the diagonal and keeps entries strictly above
/// `cut`.
pub fn binarize(scores: &WeightedMatrix, cut: f64) -> Graph {
    let n = scores.n();
    let sym = WeightedMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (scores.get(i, j) + scores.get(j, i))
        }
    });
    threshold_at(&sym, cut)
}

/// Network estimate of the mean graph of `sample`.
pub fn predict_frechet<M: MatrixMap + ?Sized>(model: &M, sample: &[Graph]) -> Result<Graph> {
    predict_frechet_at(model, sample, BINARIZE_THRESHOLD)
}

pub fn predict_frechet_at<M: MatrixMap + ?Sized>(model: &M, sample: &[Graph], cut: f64) -> Result<Graph> {
    let mean = crate::graph::sample_mean(sample)?;
    let scores = model.map(&mean)?;
    if scores.n() != mean.n() {
        return Err(Error::SizeMismatch {
            expected: mean.n(),
            found: scores.n(),
        });
    }
    Ok(binarize(&scores, cut))
}

/// Estimators compared by the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Network(Variant),
    Naive,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::Network(Variant::Ier),
        ModelId::Network(Variant::Sbm),
        ModelId::Network(Variant::Pa),
        ModelId::Network(Variant::Gen),
        ModelId::Naive,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelId::Network(v) => v.id(),
            ModelId::Naive => "naive",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelId::Network(v) => v.display_name(),
            ModelId::Naive => "Naive",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::param("model", format!("unknown model {s:?} (expected ier, sbm, pa, gen or naive)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub rel_epsilon: f64,
    pub kl_epsilon: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            rel_epsilon: REL_EPSILON,
            kl_epsilon: KL_EPSILON,
        }
    }
}

/// Errors of one estimate against the truth of one test batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: ModelId,
    pub ensemble: Ensemble,
    pub trial: usize,
    /// `|lambda_i(truth) - lambda_i(estimate)|`, descending adjacency spectra.
    pub abs: Vec<f64>,
    /// `abs[i] / max(|lambda_i(truth)|, rel_epsilon)`.
    pub rel: Vec<f64>,
    /// `|lambda_i(estimate) - <lambda>_i|` against the batch mean spectrum.
    pub abs_vs_sample_mean: Vec<f64>,
    pub rel_vs_sample_mean: Vec<f64>,
    /// KL divergence of the estimate's degree histogram from the truth's.
    pub kl: f64,
    pub seed: RngSeed,
}

/// Entrywise mean of the descending adjacency spectra of `batch`.
pub fn mean_spectrum(batch: &[Graph]) -> Result<Vec<f64>> {
    let first = batch.first().ok_or(Error::EmptySample)?;
    let mut acc = vec![0.0; first.n()];
    for g in batch {
        if g.n() != first.n() {
            return Err(Error::SizeMismatch {
                expected: first.n(),
                found: g.n(),
            });
        }
        for (a, v) in acc.iter_mut().zip(adjacency_spectrum(g).values()) {
            *a += v;
        }
    }
    let count = batch.len() as f64;
    Ok(acc.into_iter().map(|a| a / count).collect())
}

fn differences(reference: &[f64], other: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    reference
        .iter()
        .zip(other)
        .map(|(&r, &o)| {
            let d = (r - o).abs();
            (d, d / r.abs().max(eps))
        })
        .unzip()
}

/// Aligned per-trial inputs of [`evaluate`].
#[derive(Clone, Copy, Debug)]
pub struct EvalInputs<'a> {
    pub estimates: &'a [Graph],
    pub truths: &'a [Graph],
    pub mean_spectra: &'a [Vec<f64>],
    pub seeds: &'a [RngSeed],
}

/// One record per trial.
pub fn evaluate(
    model: ModelId,
    ensemble: Ensemble,
    inputs: EvalInputs<'_>,
    settings: &EvalSettings,
) -> Result<Vec<EvalRecord>> {
    let count = inputs.estimates.len();
    for len in [inputs.truths.len(), inputs.mean_spectra.len(), inputs.seeds.len()] {
        if len != count {
            return Err(Error::SizeMismatch {
                expected: count,
                found: len,
            });
        }
    }
    (0..count)
        .map(|k| {
            let truth = &inputs.truths[k];
            let estimate = &inputs.estimates[k];
            if truth.n() != estimate.n() || inputs.mean_spectra[k].len() != truth.n() {
                return Err(Error::SizeMismatch {
                    expected: truth.n(),
                    found: estimate.n(),
                });
            }
            let lt = adjacency_spectrum(truth);
            let le = adjacency_spectrum(estimate);
            let (abs, rel) = differences(lt.values(), le.values(), settings.rel_epsilon);
            let (abs_vs_sample_mean, rel_vs_sample_mean) =
                differences(&inputs.mean_spectra[k], le.values(), settings.rel_epsilon);
            let kl = kl_divergence_with(&degree_histogram(truth), &degree_histogram(estimate), settings.kl_epsilon)?;
            Ok(EvalRecord {
                model,
                ensemble,
                trial: k,
                abs,
                rel,
                abs_vs_sample_mean,
                rel_vs_sample_mean,
                kl,
                seed: inputs.seeds[k],
            })
        })
        .collect()
}

/// A value and its 1-based eigenvalue index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: ModelId,
    pub ensemble: Ensemble,
    pub trials: usize,
    pub mean_abs: Vec<f64>,
    pub mean_rel: Vec<f64>,
    pub mean_abs_vs_sample_mean: Vec<f64>,
    pub mean_rel_vs_sample_mean: Vec<f64>,
    pub max_abs: Extremum,
    pub min_abs: Extremum,
    /// Over the first [`REL_STATS_WINDOW`] eigenvalues.
    pub max_rel: Extremum,
    pub min_rel: Extremum,
    pub kl_mean: f64,
    /// Population variance over trials.
    pub kl_variance: f64,
}

fn extremum(values: &[f64], better: impl Fn(f64, f64) -> bool) -> Extremum {
    let mut best = Extremum {
        value: values[0],
        index: 1,
    };
    for (k, &v) in values.iter().enumerate().skip(1) {
        if better(v, best.value) {
            best = Extremum { value: v, index: k + 1 };
        }
    }
    best
}

fn mean_vector(records: &[&EvalRecord], field: impl Fn(&EvalRecord) -> &[f64]) -> Vec<f64> {
    let len = field(records[0]).len();
    let mut acc = vec![0.0; len];
    for r in records {
        for (a, v) in acc.iter_mut().zip(field(r)) {
            *a += v;
        }
    }
    acc.into_iter().map(|a| a / records.len() as f64).collect()
}

/// Aggregates the records of one (model, ensemble) group. Records are summed
/// in trial order, so the result does not depend on the input order.
pub fn summarize(records: &[EvalRecord]) -> Result<EvalSummary> {
    let first = records.first().ok_or(Error::EmptySample)?;
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial);
    for r in &sorted {
        if r.model != first.model || r.ensemble != first.ensemble {
            return Err(Error::param("records", "summaries need a single (model, ensemble) group"));
        }
        if r.abs.len() != first.abs.len() || r.abs.is_empty() {
            return Err(Error::SizeMismatch {
                expected: first.abs.len(),
                found: r.abs.len(),
            });
        }
    }
    let mean_abs = mean_vector(&sorted, |r| &r.abs);
    let mean_rel = mean_vector(&sorted, |r| &r.rel);
    let window = &mean_rel[..mean_rel.len().min(REL_STATS_WINDOW)];
    let count = sorted.len() as f64;
    let kl_mean = sorted.iter().map(|r| r.kl).sum::<f64>() / count;
    let kl_variance = sorted.iter().map(|r| (r.kl - kl_mean).powi(2)).sum::<f64>() / count;
    Ok(EvalSummary {
        model: first.model,
        ensemble: first.ensemble,
        trials: sorted.len(),
        max_abs: extremum(&mean_abs, |a, b| a > b),
        min_abs: extremum(&mean_abs, |a, b| a < b),
        max_rel: extremum(window, |a, b| a > b),
        min_rel: extremum(window, |a, b| a < b),
        mean_abs_vs_sample_mean: mean_vector(&sorted, |r| &r.abs_vs_sample_mean),
        mean_rel_vs_sample_mean: mean_vector(&sorted, |r| &r.rel_vs_sample_mean),
        mean_abs,
        mean_rel,
        kl_mean,
        kl_variance,
    })
}
