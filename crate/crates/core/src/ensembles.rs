//! Seeded samplers for inhomogeneous Erdős–Rényi, stochastic block model and
//! preferential attachment graphs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedMatrix};

/// Default cap on connectivity rejections in [`sample_sbm`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

/// A `(seed, stream)` pair. Every sampler draw is a pure function of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    /// A ChaCha8 generator keyed by `seed`, positioned on `stream`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derives an independent child stream. Forking is deterministic, so a
    /// tree of labels reproduces the same streams on every run.
    pub fn fork(&self, label: u64) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream: splitmix64(splitmix64(self.stream) ^ label),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IerParams {
    p: WeightedMatrix,
}

impl IerParams {
    pub fn new(p: WeightedMatrix) -> Result<Self> {
        p.check_probability()?;
        Ok(IerParams { p })
    }

    /// Every off-diagonal entry equal to `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        IerParams::new(WeightedMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { value }))
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn probabilities(&self) -> &WeightedMatrix {
        &self.p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    block_sizes: Vec<usize>,
    p: f64,
    q: f64,
}

impl SbmParams {
    pub fn new(block_sizes: Vec<usize>, p: f64, q: f64) -> Result<Self> {
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(Error::param("block_sizes", "blocks must be nonempty and positive"));
        }
        if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) || q > p {
            return Err(Error::param("p/q", format!("need 0 <= q <= p <= 1, got p={p}, q={q}")));
        }
        Ok(SbmParams { block_sizes, p, q })
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Community index of each vertex, blocks laid out contiguously.
    pub fn membership(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }

    pub fn edge_probabilities(&self) -> WeightedMatrix {
        let member = self.membership();
        WeightedMatrix::from_fn(self.n(), |i, j| match (i == j, member[i] == member[j]) {
            (true, _) => 0.0,
            (false, true) => self.p,
            (false, false) => self.q,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaParams {
    l: usize,
    n: usize,
}

impl PaParams {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::param("l", "attachment count must be at least 1"));
        }
        if n <= l + 1 {
            return Err(Error::param("n", format!("need n > l + 1, got l={l}, n={n}")));
        }
        Ok(PaParams { l, n })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `l + l (n - l - 1) = l (n - l)`.
    pub fn edge_count(&self) -> usize {
        self.l * (self.n - self.l)
    }
}

/// Beta(a, b) as `X / (X + Y)` with `X ~ Gamma(a)` and `Y ~ Gamma(b)`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    let ga = Gamma::new(a, 1.0).map_err(|e| Error::param("a", e.to_string()))?;
    let gb = Gamma::new(b, 1.0).map_err(|e| Error::param("b", e.to_string()))?;
    loop {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        // Both gammas can underflow to zero for small shapes.
        if x + y > 0.0 {
            return Ok(x / (x + y));
        }
    }
}

/// Edge-probability matrix with i.i.d. `Beta(a, b)` entries above the
/// diagonal, mirrored below it.
pub fn sample_beta_p<R: Rng + ?Sized>(a: f64, b: f64, n: usize, rng: &mut R) -> Result<IerParams> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("shape must be positive, got {a}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::param("b", format!("shape must be positive, got {b}")));
    }
    let mut p = WeightedMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sample_beta(rng, a, b)?;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    IerParams::new(p)
}

pub fn sample_ier<R: Rng + ?Sized>(params: &IerParams, rng: &mut R) -> Graph {
    let n = params.n();
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < params.p.get(i, j) {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Draws SBM graphs until one is connected.
pub fn sample_sbm<R: Rng + ?Sized>(params: &SbmParams, rng: &mut R, max_attempts: usize) -> Result<Graph> {
    if max_attempts == 0 {
        return Err(Error::param("max_attempts", "must be at least 1"));
    }
    let n = params.n();
    let member = params.membership();
    for _ in 0..max_attempts {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if member[i] == member[j] { params.p } else { params.q };
                if rng.gen::<f64>() < p {
                    g.set_edge(i, j, true);
                }
            }
        }
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityTimeout {
        attempts: max_attempts,
    })
}

/// Preferential attachment grown from a star on `l + 1` vertices (center is
/// vertex `l`). Each newcomer picks `l` distinct targets sequentially without
/// replacement, with probability proportional to their degree at the start
/// of its step.
pub fn sample_pa<R: Rng + ?Sized>(params: &PaParams, rng: &mut R) -> Graph {
    let PaParams { l, n } = *params;
    let mut g = Graph::empty(n);
    let mut degree = vec![0usize; n];
    for (leaf, d) in degree.iter_mut().enumerate().take(l) {
        g.set_edge(leaf, l, true);
        *d = 1;
    }
    degree[l] = l;

    let mut chosen = Vec::with_capacity(l);
    for newcomer in (l + 1)..n {
        let mut weights: Vec<usize> = degree[..newcomer].to_vec();
        let mut remaining: usize = weights.iter().sum();
        chosen.clear();
        for _ in 0..l {
            let mut ticket = rng.gen_range(0..remaining);
            let target = weights
                .iter()
                .position(|&w| {
                    if ticket < w {
                        true
                    } else {
                        ticket -= w;
                        false
                    }
                })
                .expect("ticket lies within the total weight");
            remaining -= weights[target];
            weights[target] = 0;
            chosen.push(target);
        }
        for &t in &chosen {
            g.set_edge(newcomer, t, true);
            degree[t] += 1;
        }
        degree[newcomer] = l;
    }
    g
}

/// Breadth-first search from vertex 0. The empty vertex set counts as
/// connected.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.n();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for (u, flag) in seen.iter_mut().enumerate() {
            if !*flag && g.has_edge(v, u) {
                *flag = true;
                reached += 1;
                queue.push_back(u);
            }
        }
    }
    reached == n
}
