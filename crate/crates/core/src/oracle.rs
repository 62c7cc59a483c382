//! Exhaustive-search study on tiny graphs: how far the naive and medoid
//! estimates fall from the true sample Fréchet mean.

use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_ier, IerParams, RngSeed};
use crate::error::{Error, Result};
use crate::frechet::{exhaustive_frechet_mean, frechet_objective, naive_frechet_mean, sample_medoid, EXHAUSTIVE_MAX_N};
use crate::graph::Graph;
use crate::spectra::Metric;

const ORACLE_STREAM: u64 = 31;
/// Objectives within this relative distance count as equal.
const AGREEMENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub n: usize,
    pub trials: usize,
    /// Graphs per sample.
    pub sample_size: usize,
    /// Constant IER edge probability of the sampled graphs.
    pub p: f64,
    pub metric: Metric,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n: 4,
            trials: 100,
            sample_size: 10,
            p: 0.9,
            metric: Metric::Hamming,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n > EXHAUSTIVE_MAX_N {
            return Err(Error::SearchTooLarge {
                n: self.n,
                limit: EXHAUSTIVE_MAX_N,
            });
        }
        if self.n == 0 {
            return Err(Error::param("oracle.n", "must be positive"));
        }
        if self.sample_size == 0 {
            return Err(Error::param("oracle.sample_size", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::param("oracle.p", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Objectives of the three estimators (and the worst sample member) on one
/// sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTrial {
    pub trial: usize,
    pub seed: RngSeed,
    pub exhaustive: f64,
    pub medoid: f64,
    pub naive: f64,
    pub worst_member: f64,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= AGREEMENT_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

impl OracleTrial {
    pub fn evaluate(trial: usize, seed: RngSeed, sample: &[Graph], metric: Metric) -> Result<Self> {
        let exhaustive = exhaustive_frechet_mean(sample, metric)?.objective;
        let medoid = sample_medoid(sample, metric)?.objective;
        let naive = naive_frechet_mean(sample, metric)?.objective;
        let worst_member = sample
            .iter()
            .map(|g| frechet_objective(g, sample, metric))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(OracleTrial {
            trial,
            seed,
            exhaustive,
            medoid,
            naive,
            worst_member,
        })
    }

    pub fn naive_is_optimal(&self) -> bool {
        same(self.naive, self.exhaustive)
    }

    pub fn medoid_is_optimal(&self) -> bool {
        same(self.medoid, self.exhaustive)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub trials: Vec<OracleTrial>,
}

impl OracleReport {
    pub fn naive_agreement(&self) -> f64 {
        self.rate(OracleTrial::naive_is_optimal)
    }

    pub fn medoid_agreement(&self) -> f64 {
        self.rate(OracleTrial::medoid_is_optimal)
    }

    pub fn mean_naive_gap(&self) -> f64 {
        self.mean(|t| t.naive - t.exhaustive)
    }

    pub fn mean_medoid_gap(&self) -> f64 {
        self.mean(|t| t.medoid - t.exhaustive)
    }

    fn rate(&self, f: impl Fn(&OracleTrial) -> bool) -> f64 {
        self.trials.iter().filter(|t| f(t)).count() as f64 / self.trials.len().max(1) as f64
    }

    fn mean(&self, f: impl Fn(&OracleTrial) -> f64) -> f64 {
        self.trials.iter().map(f).sum::<f64>() / self.trials.len().max(1) as f64
    }
}

/// Runs `cfg.trials` seeded samples. Trial `k` draws from stream `k` of the
/// oracle seed tree, so any single trial can be replayed.
pub fn run_oracle(cfg: &OracleConfig, seed: u64) -> Result<OracleReport> {
    cfg.validate()?;
    let params = IerParams::constant(cfg.n, cfg.p)?;
    let root = RngSeed::new(seed, ORACLE_STREAM);
    let trials = (0..cfg.trials)
        .map(|k| {
            let trial_seed = root.fork(k as u64);
            let mut rng = trial_seed.rng();
            let sample: Vec<Graph> = (0..cfg.sample_size).map(|_| sample_ier(&params, &mut rng)).collect();
            OracleTrial::evaluate(k, trial_seed, &sample, cfg.metric)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport { seed, trials })
}

/// The three-graph sample `{K3, K3, empty}` on which the naive estimate is
/// not the Hamming Fréchet mean.
pub fn counterexample() -> Vec<Graph> {
    vec![Graph::complete(3), Graph::complete(3), Graph::empty(3)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_objectives() {
        let t = OracleTrial::evaluate(0, RngSeed::new(0, 0), &counterexample(), Metric::Hamming).unwrap();
        assert_eq!(t.exhaustive, 2.0);
        assert_eq!(t.naive, 3.0);
        assert!(!t.naive_is_optimal());
    }

    #[test]
    fn ordering_holds_and_is_replayable() {
        let cfg = OracleConfig {
            n: 3,
            trials: 20,
            ..OracleConfig::default()
        };
        let report = run_oracle(&cfg, 5).unwrap();
        for t in &report.trials {
            assert!(t.exhaustive <= t.medoid && t.medoid <= t.worst_member);
        }
        assert_eq!(run_oracle(&cfg, 5).unwrap(), report);
        assert!((0.0..=1.0).contains(&report.naive_agreement()));
        assert!(report.mean_medoid_gap() >= 0.0);
    }

    #[test]
    fn refuses_large_n() {
        let cfg = OracleConfig {
            n: 7,
            ..OracleConfig::default()
        };
        assert!(matches!(run_oracle(&cfg, 1), Err(Error::SearchTooLarge { n: 7, limit: 6 })));
    }
}
