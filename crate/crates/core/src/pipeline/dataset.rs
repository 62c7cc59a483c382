use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_beta_p, sample_ier, sample_pa, sample_sbm, IerParams, PaParams, RngSeed, SbmParams};
use crate::error::{Error, Result};
use crate::frechet::{closed_form_ier_mean, sample_medoid};
use crate::graph::{read_graphs, sample_mean, write_graphs, Graph, WeightedMatrix};
use crate::spectra::Metric;

pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INPUTS_FILE: &str = "inputs.f32";
pub const TARGETS_FILE: &str = "targets.bin";
pub const BATCHES_DIR: &str = "batches";

const PLAN_LABEL: u64 = 0;
const TEST_LABEL: u64 = 0x7e57;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Ier,
    Sbm,
    Pa,
}

impl Ensemble {
    pub const ALL: [Ensemble; 3] = [Ensemble::Ier, Ensemble::Sbm, Ensemble::Pa];

    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Ier => "ier",
            Ensemble::Sbm => "sbm",
            Ensemble::Pa => "pa",
        }
    }

    /// The metric under which the ground-truth mean of this ensemble is defined.
    pub fn truth_metric(self) -> Metric {
        match self {
            Ensemble::Ier => Metric::Hamming,
            Ensemble::Sbm => Metric::AdjacencySpectral,
            Ensemble::Pa => Metric::LaplacianSpectral,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Ensemble::Ier => 1,
            Ensemble::Sbm => 2,
            Ensemble::Pa => 3,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ensemble::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::param("ensemble", format!("unknown ensemble {s:?} (expected ier, sbm or pa)")))
    }
}

/// Generator parameters of one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairParams {
    Ier { a: f64, b: f64 },
    Sbm { block_sizes: Vec<usize>, p: f64, q: f64 },
    Pa { l: usize },
}

impl PairParams {
    pub fn ensemble(&self) -> Ensemble {
        match self {
            PairParams::Ier { .. } => Ensemble::Ier,
            PairParams::Sbm { .. } => Ensemble::Sbm,
            PairParams::Pa { .. } => Ensemble::Pa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub index: usize,
    pub params: PairParams,
    pub seed: RngSeed,
}

/// A batch of graphs, its sample mean adjacency matrix (the network input)
/// and the ensemble's reference mean graph (the training target).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPair {
    pub input: WeightedMatrix,
    pub target: Graph,
    pub batch: Vec<Graph>,
    pub meta: PairMeta,
}

/// Counts and parameter ranges of the three generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Vertices per graph.
    pub n: usize,
    /// Graphs per batch.
    pub batch_size: usize,
    pub ier_draws: usize,
    pub ier_batches_per_draw: usize,
    pub beta_a_range: [f64; 2],
    pub beta_b_range: [f64; 2],
    pub sbm_layouts: Vec<Vec<usize>>,
    pub sbm_draws_per_layout: usize,
    pub sbm_batches_per_draw: usize,
    pub sbm_p_range: [f64; 2],
    pub sbm_q_range: [f64; 2],
    /// Connectivity rejections allowed per SBM graph.
    pub sbm_max_attempts: usize,
    pub pa_l_values: Vec<usize>,
    pub pa_batches_per_l: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 28,
            batch_size: 10,
            ier_draws: 36,
            ier_batches_per_draw: 10,
            beta_a_range: [0.5, 5.0],
            beta_b_range: [0.5, 5.0],
            sbm_layouts: vec![vec![14, 14], vec![10, 10, 8]],
            sbm_draws_per_layout: 18,
            sbm_batches_per_draw: 10,
            sbm_p_range: [0.5, 0.9],
            sbm_q_range: [0.01, 0.5],
            sbm_max_attempts: crate::ensembles::DEFAULT_MAX_ATTEMPTS,
            pa_l_values: vec![5, 7, 10, 12, 15, 17, 20, 22, 25],
            pa_batches_per_l: 40,
        }
    }
}

fn check_range(name: &'static str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && lo <= r[0] && r[0] <= r[1] && r[1] <= hi) {
        return Err(Error::param(name, format!("range {r:?} must satisfy {lo} <= min <= max <= {hi}")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("gen.n", "need at least 2 vertices"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("gen.batch_size", "must be positive"));
        }
        check_range("gen.beta_a_range", self.beta_a_range, f64::MIN_POSITIVE, f64::MAX)?;
        check_range("gen.beta_b_range", self.beta_b_range, f64::MIN_POSITIVE, f64::MAX)?;
        check_range("gen.sbm_p_range", self.sbm_p_range, 0.0, 1.0)?;
        check_range("gen.sbm_q_range", self.sbm_q_range, 0.0, 1.0)?;
        if self.sbm_q_range[1] > self.sbm_p_range[0] {
            return Err(Error::param("gen.sbm_q_range", "q must never exceed p (max q > min p)"));
        }
        if self.sbm_layouts.is_empty() {
            return Err(Error::param("gen.sbm_layouts", "need at least one block layout"));
        }
        for layout in &self.sbm_layouts {
            if layout.iter().sum::<usize>() != self.n || layout.contains(&0) {
                return Err(Error::param(
                    "gen.sbm_layouts",
                    format!("layout {layout:?} must be positive block sizes summing to n = {}", self.n),
                ));
            }
        }
        if self.sbm_max_attempts == 0 {
            return Err(Error::param("gen.sbm_max_attempts", "must be positive"));
        }
        if self.pa_l_values.is_empty() {
            return Err(Error::param("gen.pa_l_values", "need at least one l value"));
        }
        for &l in &self.pa_l_values {
            PaParams::new(l, self.n).map_err(|_| {
                Error::param("gen.pa_l_values", format!("l = {l} needs 1 <= l and l + 1 < n = {}", self.n))
            })?;
        }
        Ok(())
    }

    /// Number of pairs [`generate_dataset`] produces for `ensemble`.
    pub fn pair_count(&self, ensemble: Ensemble) -> usize {
        match ensemble {
            Ensemble::Ier => self.ier_draws * self.ier_batches_per_draw,
            Ensemble::Sbm => self.sbm_layouts.len() * self.sbm_draws_per_layout * self.sbm_batches_per_draw,
            Ensemble::Pa => self.pa_l_values.len() * self.pa_batches_per_l,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    range[0] + (range[1] - range[0]) * rng.gen::<f64>()
}

/// Training plan: a handful of parameter draws, each repeated over several
/// batches.
fn training_plan(ensemble: Ensemble, cfg: &GenConfig, seed: RngSeed) -> Vec<PairParams> {
    let mut rng = seed.rng();
    let mut plan = Vec::with_capacity(cfg.pair_count(ensemble));
    match ensemble {
        Ensemble::Ier => {
            for _ in 0..cfg.ier_draws {
                let a = uniform(&mut rng, cfg.beta_a_range);
                let b = uniform(&mut rng, cfg.beta_b_range);
                plan.extend(std::iter::repeat_n(PairParams::Ier { a, b }, cfg.ier_batches_per_draw));
            }
        }
        Ensemble::Sbm => {
            for layout in &cfg.sbm_layouts {
                for _ in 0..cfg.sbm_draws_per_layout {
                    let p = uniform(&mut rng, cfg.sbm_p_range);
                    let q = uniform(&mut rng, cfg.sbm_q_range);
                    let params = PairParams::Sbm {
                        block_sizes: layout.clone(),
                        p,
                        q,
                    };
                    plan.extend(std::iter::repeat_n(params, cfg.sbm_batches_per_draw));
                }
            }
        }
        Ensemble::Pa => {
            for &l in &cfg.pa_l_values {
                plan.extend(std::iter::repeat_n(PairParams::Pa { l }, cfg.pa_batches_per_l));
            }
        }
    }
    plan
}

/// Test plan: every trial gets its own parameter draw; SBM layouts and PA
/// l values are cycled.
fn test_plan(ensemble: Ensemble, cfg: &GenConfig, trials: usize, seed: RngSeed) -> Vec<PairParams> {
    let mut rng = seed.rng();
    (0..trials)
        .map(|k| match ensemble {
            Ensemble::Ier => PairParams::Ier {
                a: uniform(&mut rng, cfg.beta_a_range),
                b: uniform(&mut rng, cfg.beta_b_range),
            },
            Ensemble::Sbm => PairParams::Sbm {
                block_sizes: cfg.sbm_layouts[k % cfg.sbm_layouts.len()].clone(),
                p: uniform(&mut rng, cfg.sbm_p_range),
                q: uniform(&mut rng, cfg.sbm_q_range),
            },
            Ensemble::Pa => PairParams::Pa {
                l: cfg.pa_l_values[k % cfg.pa_l_values.len()],
            },
        })
        .collect()
}

/// One IER batch from a fixed probability matrix, with its closed-form
/// mean as target.
pub fn ier_batch<R: Rng + ?Sized>(p: &IerParams, batch_size: usize, rng: &mut R) -> Result<(Vec<Graph>, Graph)> {
    let batch = (0..batch_size).map(|_| sample_ier(p, rng)).collect();
    Ok((batch, closed_form_ier_mean(p.probabilities())?))
}

/// One batch of connected SBM graphs with its adjacency-spectral medoid.
pub fn sbm_batch<R: Rng + ?Sized>(
    params: &SbmParams,
    batch_size: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<(Vec<Graph>, Graph)> {
    let batch = (0..batch_size)
        .map(|_| sample_sbm(params, rng, max_attempts))
        .collect::<Result<Vec<_>>>()?;
    let target = sample_medoid(&batch, Ensemble::Sbm.truth_metric())?.mean;
    Ok((batch, target))
}

/// One batch of PA graphs with its Laplacian-spectral medoid.
pub fn pa_batch<R: Rng + ?Sized>(params: &PaParams, batch_size: usize, rng: &mut R) -> Result<(Vec<Graph>, Graph)> {
    let batch: Vec<Graph> = (0..batch_size).map(|_| sample_pa(params, rng)).collect();
    let target = sample_medoid(&batch, Ensemble::Pa.truth_metric())?.mean;
    Ok((batch, target))
}

fn build_pair(index: usize, params: PairParams, cfg: &GenConfig, seed: RngSeed) -> Result<DatasetPair> {
    let mut rng = seed.rng();
    let (batch, target) = match &params {
        PairParams::Ier { a, b } => {
            let p = sample_beta_p(*a, *b, cfg.n, &mut rng)?;
            ier_batch(&p, cfg.batch_size, &mut rng)?
        }
        PairParams::Sbm { block_sizes, p, q } => {
            let params = SbmParams::new(block_sizes.clone(), *p, *q)?;
            sbm_batch(&params, cfg.batch_size, cfg.sbm_max_attempts, &mut rng)?
        }
        PairParams::Pa { l } => pa_batch(&PaParams::new(*l, cfg.n)?, cfg.batch_size, &mut rng)?,
    };
    Ok(DatasetPair {
        input: sample_mean(&batch)?,
        target,
        batch,
        meta: PairMeta { index, params, seed },
    })
}

fn build_pairs(plan: Vec<PairParams>, cfg: &GenConfig, root: RngSeed) -> Result<Vec<DatasetPair>> {
    plan.into_par_iter()
        .enumerate()
        .map(|(k, params)| build_pair(k, params, cfg, root.fork(k as u64 + 1)))
        .collect()
}

/// Training pairs of `ensemble`. Batches are generated in parallel, each
/// from its own stream, and returned in plan order.
pub fn generate_dataset(ensemble: Ensemble, cfg: &GenConfig, seed: u64) -> Result<Vec<DatasetPair>> {
    cfg.validate()?;
    let root = RngSeed::new(seed, ensemble.stream());
    build_pairs(training_plan(ensemble, cfg, root.fork(PLAN_LABEL)), cfg, root)
}

/// Held-out pairs of `ensemble`, on streams disjoint from the training data.
pub fn generate_test_set(ensemble: Ensemble, cfg: &GenConfig, trials: usize, seed: u64) -> Result<Vec<DatasetPair>> {
    cfg.validate()?;
    let root = RngSeed::new(seed, ensemble.stream()).fork(TEST_LABEL);
    build_pairs(test_plan(ensemble, cfg, trials, root.fork(PLAN_LABEL)), cfg, root)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub ensemble: Ensemble,
    pub n: usize,
    pub batch_size: usize,
    pub pair_count: usize,
    pub seed: u64,
    pub config: GenConfig,
    pub pairs: Vec<PairMeta>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn batch_file(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join(BATCHES_DIR).join(format!("{index:05}.txt"))
}

/// Writes `pairs` as a dataset directory.
pub fn write_dataset(dir: &Path, ensemble: Ensemble, seed: u64, cfg: &GenConfig, pairs: &[DatasetPair]) -> Result<()> {
    let n = cfg.n;
    if let Some(bad) = pairs.iter().find(|p| p.input.n() != n || p.target.n() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            found: bad.input.n(),
        });
    }
    fs::create_dir_all(dir.join(BATCHES_DIR)).map_err(|e| Error::io(dir, e))?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        ensemble,
        n,
        batch_size: cfg.batch_size,
        pair_count: pairs.len(),
        seed,
        config: cfg.clone(),
        pairs: pairs.iter().map(|p| p.meta.clone()).collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(INPUTS_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for pair in pairs {
        for &v in pair.input.as_slice() {
            out.write_all(&(v as f32).to_le_bytes()).map_err(|e| Error::io(&path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(TARGETS_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for pair in pairs {
        writeln!(out, "{}", pair.target.to_upper_bits()).map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    for (k, pair) in pairs.iter().enumerate() {
        let path = batch_file(dir, k);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        write_graphs(&mut out, n, &pair.batch)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// A dataset directory read back from disk. Inputs keep the on-disk 32-bit
/// precision.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredDataset {
    pub manifest: Manifest,
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Graph>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::Missing {
            what: "dataset manifest",
            path,
        });
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(format_err(
            &path,
            format!("schema version {} (expected {SCHEMA_VERSION})", manifest.schema_version),
        ));
    }
    if manifest.pairs.len() != manifest.pair_count {
        return Err(format_err(&path, "pair_count disagrees with the pair list"));
    }
    Ok(manifest)
}

/// Reads manifest, inputs and targets (not the batch files).
pub fn read_dataset(dir: &Path) -> Result<StoredDataset> {
    let manifest = read_manifest(dir)?;
    let (n, count) = (manifest.n, manifest.pair_count);

    let path = dir.join(INPUTS_FILE);
    let mut bytes = Vec::new();
    File::open(&path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&path, e))?;
    if bytes.len() != count * n * n * 4 {
        return Err(format_err(
            &path,
            format!("{} bytes, expected {} for {count} pairs of {n}x{n}", bytes.len(), count * n * n * 4),
        ));
    }
    let inputs = bytes
        .chunks_exact(n * n * 4)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect()
        })
        .collect();

    let path = dir.join(TARGETS_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let targets = BufReader::new(file)
        .lines()
        .map(|line| {
            let line = line.map_err(|e| Error::io(&path, e))?;
            Graph::from_upper_bits(n, line.trim_end()).map_err(|e| format_err(&path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    if targets.len() != count {
        return Err(format_err(&path, format!("{} targets for {count} pairs", targets.len())));
    }
    Ok(StoredDataset {
        manifest,
        inputs,
        targets,
    })
}

/// Member graphs of pair `index`.
pub fn read_batch(dir: &Path, index: usize) -> Result<Vec<Graph>> {
    let path = batch_file(dir, index);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    read_graphs(BufReader::new(file)).map_err(|e| format_err(&path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig {
            n: 12,
            batch_size: 4,
            ier_draws: 2,
            ier_batches_per_draw: 3,
            sbm_layouts: vec![vec![6, 6], vec![4, 4, 4]],
            sbm_draws_per_layout: 2,
            sbm_batches_per_draw: 2,
            pa_l_values: vec![2, 5],
            pa_batches_per_l: 3,
            ..GenConfig::default()
        }
    }

    #[test]
    fn default_counts() {
        let cfg = GenConfig::default();
        cfg.validate().unwrap();
        for e in Ensemble::ALL {
            assert_eq!(cfg.pair_count(e), 360);
        }
    }

    #[test]
    fn pair_structure() {
        let cfg = small();
        for e in Ensemble::ALL {
            let pairs = generate_dataset(e, &cfg, 9).unwrap();
            assert_eq!(pairs.len(), cfg.pair_count(e));
            for (k, pair) in pairs.iter().enumerate() {
                assert_eq!(pair.meta.index, k);
                assert_eq!(pair.meta.params.ensemble(), e);
                assert_eq!(pair.batch.len(), 4);
                assert_eq!(pair.input, sample_mean(&pair.batch).unwrap());
                if e != Ensemble::Ier {
                    assert!(pair.batch.contains(&pair.target));
                }
            }
        }
    }

    #[test]
    fn seeded_and_disjoint_from_test_streams() {
        let cfg = small();
        let a = generate_dataset(Ensemble::Sbm, &cfg, 4).unwrap();
        let b = generate_dataset(Ensemble::Sbm, &cfg, 4).unwrap();
        assert_eq!(a, b);
        let t = generate_test_set(Ensemble::Sbm, &cfg, a.len(), 4).unwrap();
        assert_ne!(a[0].batch, t[0].batch);
    }

    #[test]
    fn test_plan_cycles_layouts() {
        let cfg = small();
        let t = generate_test_set(Ensemble::Pa, &cfg, 5, 1).unwrap();
        let ls: Vec<_> = t.iter().map(|p| p.meta.params.clone()).collect();
        assert_eq!(ls[0], PairParams::Pa { l: 2 });
        assert_eq!(ls[1], PairParams::Pa { l: 5 });
        assert_eq!(ls[4], PairParams::Pa { l: 2 });
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = GenConfig {
            sbm_q_range: [0.1, 0.7],
            ..GenConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("sbm_q_range"));
        let cfg = GenConfig {
            pa_l_values: vec![27],
            ..GenConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("pa_l_values"));
        let cfg = GenConfig {
            sbm_layouts: vec![vec![14, 13]],
            ..GenConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let pairs = generate_dataset(Ensemble::Ier, &cfg, 3).unwrap();
        write_dataset(dir.path(), Ensemble::Ier, 3, &cfg, &pairs).unwrap();
        let stored = read_dataset(dir.path()).unwrap();
        assert_eq!(stored.manifest.pair_count, pairs.len());
        assert_eq!(stored.manifest.config, cfg);
        for (k, pair) in pairs.iter().enumerate() {
            assert_eq!(stored.targets[k], pair.target);
            let expect: Vec<f32> = pair.input.as_slice().iter().map(|&v| v as f32).collect();
            assert_eq!(stored.inputs[k], expect);
            assert_eq!(read_batch(dir.path(), k).unwrap(), pair.batch);
            assert_eq!(stored.manifest.pairs[k], pair.meta);
        }
    }

    #[test]
    fn corrupt_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let pairs = generate_dataset(Ensemble::Pa, &cfg, 3).unwrap();
        write_dataset(dir.path(), Ensemble::Pa, 3, &cfg, &pairs).unwrap();
        let path = dir.path().join(INPUTS_FILE);
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Format { .. })));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(read_dataset(empty.path()), Err(Error::Missing { .. })));
    }
}
