use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ensembles::RngSeed;
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedMatrix};
use crate::minicnn::{train_step, AdamConfig, AdamState, ModelParams, Tensor3, DEFAULT_BASE_CHANNELS};

use super::dataset::{DatasetPair, Ensemble, StoredDataset};

const INIT_LABEL: u64 = 0;

/// The four trained networks, named after their training data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ier,
    Sbm,
    Pa,
    Gen,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ier, Variant::Sbm, Variant::Pa, Variant::Gen];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Ier => "ier",
            Variant::Sbm => "sbm",
            Variant::Pa => "pa",
            Variant::Gen => "gen",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Ier => "IER-Unet",
            Variant::Sbm => "SBM-Unet",
            Variant::Pa => "PA-Unet",
            Variant::Gen => "Gen-Unet",
        }
    }

    /// Datasets whose concatenation (in this order) trains the variant.
    pub fn training_ensembles(self) -> &'static [Ensemble] {
        match self {
            Variant::Ier => &[Ensemble::Ier],
            Variant::Sbm => &[Ensemble::Sbm],
            Variant::Pa => &[Ensemble::Pa],
            Variant::Gen => &Ensemble::ALL,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Variant::Ier => 11,
            Variant::Sbm => 12,
            Variant::Pa => 13,
            Variant::Gen => 14,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::param("variant", format!("unknown variant {s:?} (expected ier, sbm, pa or gen)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_channels: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 100,
            batch_size: 8,
            base_channels: DEFAULT_BASE_CHANNELS,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("train.epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("train.batch_size", "must be positive"));
        }
        if self.base_channels == 0 {
            return Err(Error::param("train.base_channels", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("train.lr", "must be positive and finite"));
        }
        for (name, b) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::param(name, "must lie in [0, 1)"));
            }
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::param("train.eps", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Network-ready input and target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub input: Tensor3<f32>,
    pub target: Tensor3<f32>,
}

impl TrainingPair {
    /// Rounds the input to 32 bits, the precision stored on disk.
    pub fn from_matrices(input: &WeightedMatrix, target: &Graph) -> Result<Self> {
        let n = input.n();
        if target.n() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: target.n(),
            });
        }
        Ok(TrainingPair {
            input: Tensor3::new(n, n, 1, input.as_slice().iter().map(|&v| v as f32).collect())?,
            target: Tensor3::new(n, n, 1, target.adjacency().iter().map(|&b| f32::from(b)).collect())?,
        })
    }

    pub fn from_pairs(pairs: &[DatasetPair]) -> Result<Vec<Self>> {
        pairs.iter().map(|p| Self::from_matrices(&p.input, &p.target)).collect()
    }

    pub fn from_stored(data: &StoredDataset) -> Result<Vec<Self>> {
        let n = data.manifest.n;
        data.inputs
            .iter()
            .zip(&data.targets)
            .map(|(input, target)| {
                Ok(TrainingPair {
                    input: Tensor3::new(n, n, 1, input.clone())?,
                    target: Tensor3::new(n, n, 1, target.adjacency().iter().map(|&b| f32::from(b)).collect())?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub adam: AdamState<f32>,
    /// Mean per-sample BCE of every epoch, in order.
    pub epoch_losses: Vec<f64>,
}

pub fn train_variant(variant: Variant, data: &[TrainingPair], cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_variant_with(variant, data, cfg, seed, |_, _| {})
}

/// Trains from a fresh initialization, reshuffling the data every epoch.
/// `on_epoch` receives the 1-based epoch number and its mean loss.
pub fn train_variant_with(
    variant: Variant,
    data: &[TrainingPair],
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = data.first().ok_or(Error::EmptySample)?;
    let side = first.input.h();
    let root = RngSeed::new(seed, variant.stream());
    let mut params = ModelParams::init(side, cfg.base_channels, root.fork(INIT_LABEL))?;
    let mut adam = AdamState::new(params.len(), cfg.adam());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut root.fork(epoch as u64).rng());
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&k| (&data[k].input, &data[k].target)).collect();
            total += train_step(&mut params, &mut adam, &batch)? * chunk.len() as f64;
        }
        let mean = total / data.len() as f64;
        on_epoch(epoch, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        params,
        adam,
        epoch_losses,
    })
}

/// CSV with header `epoch,mean_loss`.
pub fn write_loss_log(path: &Path, losses: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,mean_loss\n");
    for (k, loss) in losses.iter().enumerate() {
        text.push_str(&format!("{},{loss}\n", k + 1));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(count: usize) -> Vec<TrainingPair> {
        (0..count)
            .map(|k| {
                let input = Tensor3::from_fn(8, 8, 1, |y, x, _| ((y * 3 + x * 5 + k) % 7) as f32 / 6.0);
                let target = Tensor3::from_fn(8, 8, 1, |y, x, _| f32::from(u8::from((y * 3 + x * 5 + k) % 7 > 3)));
                TrainingPair { input, target }
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 4,
            base_channels: 2,
            lr: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_and_runs_are_identical() {
        let data = toy_data(10);
        let a = train_variant(Variant::Ier, &data, &quick(), 5).unwrap();
        let b = train_variant(Variant::Ier, &data, &quick(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epoch_losses.len(), 3);
        assert!(a.epoch_losses[2] < a.epoch_losses[0], "{:?}", a.epoch_losses);
        assert_eq!(a.adam.t, 9);
        let c = train_variant(Variant::Sbm, &data, &quick(), 5).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let bad = TrainConfig {
            epochs: 0,
            ..quick()
        };
        assert!(train_variant(Variant::Pa, &toy_data(2), &bad, 1).is_err());
        assert!(matches!(train_variant(Variant::Pa, &[], &quick(), 1), Err(Error::EmptySample)));
    }

    #[test]
    fn training_pair_from_graph() {
        let g = Graph::complete(4);
        let m = crate::graph::sample_mean(&[g.clone(), Graph::empty(4)]).unwrap();
        let pair = TrainingPair::from_matrices(&m, &g).unwrap();
        assert_eq!(pair.input.get(0, 1, 0), 0.5);
        assert_eq!(pair.target.get(0, 1, 0), 1.0);
        assert_eq!(pair.target.get(2, 2, 0), 0.0);
        assert!(TrainingPair::from_matrices(&m, &Graph::empty(3)).is_err());
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.id().parse::<Variant>().unwrap(), v);
        }
        assert!("naive".parse::<Variant>().is_err());
        assert_eq!(Variant::Gen.training_ensembles().len(), 3);
    }
}
