//! Reference Fréchet means: closed-form thresholding, the naive threshold of
//! the sample mean, the sample medoid and exhaustive search on tiny graphs.
//!
//! The objective of a candidate `G` is `(1/N) sum_k d(G, G_k)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_mean, threshold_half, Graph, WeightedMatrix};
use crate::spectra::Metric;

/// Largest vertex count accepted by [`exhaustive_frechet_mean`]
/// (`2^15` candidate graphs).
pub const EXHAUSTIVE_MAX_N: usize = 6;

/// Two objectives closer than this (relative) count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrechetMethod {
    ClosedFormIer,
    NaiveThreshold,
    SampleMedoid,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrechetResult {
    pub mean: Graph,
    pub objective: f64,
    pub method: FrechetMethod,
    pub metric: Metric,
}

/// Mean squared distance from `candidate` to the members of `sample`.
pub fn frechet_objective(candidate: &Graph, sample: &[Graph], metric: Metric) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for g in sample {
        let d = metric.distance(candidate, g)?;
        total += d * d;
    }
    Ok(total / sample.len() as f64)
}

fn embedded_objective(metric: Metric, candidate: &[f64], sample: &[Vec<f64>]) -> f64 {
    let total: f64 = sample
        .iter()
        .map(|s| {
            let d = metric.embedded_distance(candidate, s);
            d * d
        })
        .sum();
    total / sample.len() as f64
}

fn improves(candidate: f64, best: f64) -> bool {
    !best.is_finite() || candidate < best - TIE_TOLERANCE * best.abs().max(1.0)
}

fn common_n(sample: &[Graph]) -> Result<usize> {
    let n = sample.first().ok_or(Error::EmptySample)?.n();
    if let Some(g) = sample.iter().find(|g| g.n() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            found: g.n(),
        });
    }
    Ok(n)
}

/// Closed-form mean of an inhomogeneous Erdős–Rényi sample: threshold the
/// edge-probability (or sample mean) matrix strictly above 1/2.
pub fn closed_form_ier_mean(p: &WeightedMatrix) -> Result<Graph> {
    p.check_probability()?;
    Ok(threshold_half(p))
}

pub fn naive_frechet_mean(sample: &[Graph], metric: Metric) -> Result<FrechetResult> {
    let mean = threshold_half(&sample_mean(sample)?);
    let objective = frechet_objective(&mean, sample, metric)?;
    Ok(FrechetResult {
        mean,
        objective,
        method: FrechetMethod::NaiveThreshold,
        metric,
    })
}

/// The sample member with the smallest objective; ties go to the lowest
/// index.
pub fn sample_medoid(sample: &[Graph], metric: Metric) -> Result<FrechetResult> {
    let (idx, objective) = medoid_pick(sample, metric)?;
    Ok(FrechetResult {
        mean: sample[idx].clone(),
        objective,
        method: FrechetMethod::SampleMedoid,
        metric,
    })
}

/// Index of the medoid, same rule as [`sample_medoid`].
pub fn medoid_index(sample: &[Graph], metric: Metric) -> Result<usize> {
    medoid_pick(sample, metric).map(|(idx, _)| idx)
}

fn medoid_pick(sample: &[Graph], metric: Metric) -> Result<(usize, f64)> {
    common_n(sample)?;
    let points: Vec<Vec<f64>> = sample.iter().map(|g| metric.embed(g)).collect();
    let mut best = (0, f64::INFINITY);
    for (idx, p) in points.iter().enumerate() {
        let obj = embedded_objective(metric, p, &points);
        if improves(obj, best.1) {
            best = (idx, obj);
        }
    }
    Ok(best)
}

/// Global minimizer over every graph on `n <= 6` labeled vertices. Candidates
/// are visited in lexicographic order of their upper-triangle bit strings, so
/// ties resolve to the lexicographically smallest string.
pub fn exhaustive_frechet_mean(sample: &[Graph], metric: Metric) -> Result<FrechetResult> {
    let n = common_n(sample)?;
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::SearchTooLarge {
            n,
            limit: EXHAUSTIVE_MAX_N,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let points: Vec<Vec<f64>> = sample.iter().map(|g| metric.embed(g)).collect();

    let mut best: Option<(Graph, f64)> = None;
    for code in 0u32..(1u32 << m) {
        let mut candidate = Graph::empty(n);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            // Character k of the bit string is the k-th most significant bit.
            if code >> (m - 1 - k) & 1 == 1 {
                candidate.set_edge(i, j, true);
            }
        }
        let obj = embedded_objective(metric, &metric.embed(&candidate), &points);
        if best.as_ref().is_none_or(|(_, b)| improves(obj, *b)) {
            best = Some((candidate, obj));
        }
    }
    let (mean, objective) = best.expect("at least one candidate");
    Ok(FrechetResult {
        mean,
        objective,
        method: FrechetMethod::Exhaustive,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3_k3_empty() -> Vec<Graph> {
        vec![Graph::complete(3), Graph::complete(3), Graph::empty(3)]
    }

    #[test]
    fn closed_form_examples() {
        let c = |v: f64| WeightedMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { v });
        assert_eq!(closed_form_ier_mean(&c(0.7)).unwrap(), Graph::complete(4));
        assert_eq!(closed_form_ier_mean(&c(0.5)).unwrap(), Graph::empty(4));
        let block = WeightedMatrix::from_fn(4, |i, j| match (i == j, (i < 2) == (j < 2)) {
            (true, _) => 0.0,
            (false, true) => 0.9,
            (false, false) => 0.1,
        });
        assert_eq!(closed_form_ier_mean(&block).unwrap(), Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap());
        assert!(closed_form_ier_mean(&c(1.5)).is_err());
    }

    #[test]
    fn medoid_by_hand() {
        let r = sample_medoid(&k3_k3_empty(), Metric::Hamming).unwrap();
        assert_eq!(r.mean, Graph::complete(3));
        assert_eq!(r.objective, 3.0);
        assert_eq!(r.method, FrechetMethod::SampleMedoid);
        let same = vec![Graph::complete(4); 3];
        let r = sample_medoid(&same, Metric::LaplacianSpectral).unwrap();
        assert_eq!((r.mean, r.objective), (Graph::complete(4), 0.0));
        assert!(matches!(sample_medoid(&[], Metric::Hamming), Err(Error::EmptySample)));
    }

    #[test]
    fn medoid_ties_go_to_lowest_index() {
        let a = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let b = Graph::from_edges(3, &[(1, 2)]).unwrap();
        // Symmetric sample: both members have the same objective.
        let r = sample_medoid(&[a.clone(), b.clone()], Metric::Hamming).unwrap();
        assert_eq!(r.mean, a);
        assert_eq!(medoid_index(&[b.clone(), a], Metric::Hamming).unwrap(), 0);
    }

    #[test]
    fn exhaustive_beats_naive_threshold() {
        let sample = k3_k3_empty();
        let exact = exhaustive_frechet_mean(&sample, Metric::Hamming).unwrap();
        assert_eq!(exact.objective, 2.0);
        assert_eq!(exact.mean.edge_count(), 2);
        // Lexicographically smallest 2-edge string on 3 vertices is "011".
        assert_eq!(exact.mean.to_upper_bits(), "011");
        let naive = naive_frechet_mean(&sample, Metric::Hamming).unwrap();
        assert_eq!(naive.mean, Graph::complete(3));
        assert_eq!(naive.objective, 3.0);
    }

    #[test]
    fn exhaustive_identical_sample() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let r = exhaustive_frechet_mean(&vec![g.clone(); 3], Metric::Hamming).unwrap();
        assert_eq!((r.mean, r.objective), (g, 0.0));
    }

    #[test]
    fn exhaustive_refuses_large_n() {
        let sample = vec![Graph::empty(7)];
        assert!(matches!(
            exhaustive_frechet_mean(&sample, Metric::Hamming),
            Err(Error::SearchTooLarge { n: 7, limit: 6 })
        ));
    }

    #[test]
    fn naive_examples() {
        let r = naive_frechet_mean(&[Graph::complete(3), Graph::empty(3)], Metric::Hamming).unwrap();
        assert_eq!(r.mean, Graph::empty(3));
        let g = Graph::from_edges(4, &[(0, 3)]).unwrap();
        let r = naive_frechet_mean(std::slice::from_ref(&g), Metric::AdjacencySpectral).unwrap();
        assert_eq!((r.mean, r.objective), (g, 0.0));
        assert!(naive_frechet_mean(&[], Metric::Hamming).is_err());
    }

    #[test]
    fn objectives_recompute() {
        let sample = k3_k3_empty();
        for metric in [Metric::Hamming, Metric::AdjacencySpectral, Metric::LaplacianSpectral] {
            let r = sample_medoid(&sample, metric).unwrap();
            let direct = frechet_objective(&r.mean, &sample, metric).unwrap();
            assert!((r.objective - direct).abs() < 1e-9);
        }
    }
}
