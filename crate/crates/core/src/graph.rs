//! Simple undirected graphs on a common labeled vertex set, together with the
//! derived matrices and degree statistics used throughout the crate.
//!
//! A [`Graph`] stores its full binary adjacency matrix. All constructors
//! enforce symmetry and an empty diagonal, so any `Graph` value is valid.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Smoothing floor applied to the denominator bins of [`kl_divergence`].
pub const KL_EPSILON: f64 = 1e-6;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    adj: Vec<u8>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![0; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(i, j, true);
            }
        }
        g
    }

    /// Builds a graph from an undirected edge list (0-based vertices).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    /// Validates a row-major `n*n` 0/1 matrix.
    pub fn from_adjacency(n: usize, adj: Vec<u8>) -> Result<Self> {
        if adj.len() != n * n {
            return Err(Error::InvalidGraph(format!(
                "adjacency has {} entries, expected {}",
                adj.len(),
                n * n
            )));
        }
        for i in 0..n {
            if adj[i * n + i] != 0 {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            for j in 0..n {
                let a = adj[i * n + j];
                if a > 1 {
                    return Err(Error::InvalidGraph(format!("entry ({i},{j}) = {a} is not binary")));
                }
                if a != adj[j * n + i] {
                    return Err(Error::InvalidGraph(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Graph { n, adj })
    }

    /// Parses the strict upper triangle, row-major, as a string of '0'/'1'.
    pub fn from_upper_bits(n: usize, bits: &str) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if bits.len() != expected {
            return Err(Error::InvalidGraph(format!(
                "bit string has length {}, expected {expected} for n={n}",
                bits.len()
            )));
        }
        let mut g = Graph::empty(n);
        let mut chars = bits.bytes();
        for i in 0..n {
            for j in (i + 1)..n {
                match chars.next() {
                    Some(b'1') => g.set_edge(i, j, true),
                    Some(b'0') => {}
                    other => {
                        return Err(Error::InvalidGraph(format!(
                            "unexpected character {:?} in bit string",
                            other.map(char::from)
                        )))
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] != 0
    }

    /// Sets or clears edge `{i, j}`. Requests for `i == j` are ignored.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        if i == j {
            return;
        }
        let v = u8::from(present);
        self.adj[i * self.n + j] = v;
        self.adj[j * self.n + i] = v;
    }

    pub fn adjacency(&self) -> &[u8] {
        &self.adj
    }

    pub fn edge_count(&self) -> usize {
        self.upper_triangle().filter(|&b| b).count()
    }

    /// Strict upper triangle in row-major order.
    pub fn upper_triangle(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| self.has_edge(i, j)))
    }

    pub fn to_upper_bits(&self) -> String {
        self.upper_triangle().map(|b| if b { '1' } else { '0' }).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj
            .chunks(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().map(|&a| a as usize).sum())
            .collect()
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> WeightedMatrix {
        let n = self.n;
        let degrees = self.degrees();
        WeightedMatrix::from_fn(n, |i, j| {
            if i == j {
                degrees[i] as f64
            } else {
                -f64::from(self.adj[i * n + j])
            }
        })
    }

    pub fn to_weighted(&self) -> WeightedMatrix {
        WeightedMatrix {
            n: self.n,
            w: self.adj.iter().map(|&a| f64::from(a)).collect(),
        }
    }

    /// Relabels vertices: vertex `v` of `self` becomes vertex `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter {
                name: "perm",
                reason: format!("not a permutation of 0..{n}"),
            });
        }
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) {
                    g.set_edge(perm[i], perm[j], true);
                }
            }
        }
        Ok(g)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, {})", self.n, self.to_upper_bits())
    }
}

/// Dense real `n x n` matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct WeightedMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightedMatrix {
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "{} entries cannot form a square {n}x{n} matrix",
                w.len()
            )));
        }
        Ok(WeightedMatrix { n, w })
    }

    pub fn zeros(n: usize) -> Self {
        WeightedMatrix { n, w: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut w = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                w.push(f(i, j));
            }
        }
        WeightedMatrix { n, w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }

    /// Checks the edge-probability contract: symmetric, zero diagonal,
    /// entries in `[0, 1]`.
    pub fn check_probability(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) = {v} outside [0,1]")));
                }
                if v != self.get(j, i) {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for WeightedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WeightedMatrix(n={})", self.n)?;
        for row in self.w.chunks(self.n.max(1)) {
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

/// Entrywise mean of the adjacency matrices of `sample`.
pub fn sample_mean(sample: &[Graph]) -> Result<WeightedMatrix> {
    let first = sample.first().ok_or(Error::EmptySample)?;
    let n = first.n();
    let mut sum = vec![0u32; n * n];
    for g in sample {
        if g.n() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: g.n(),
            });
        }
        for (s, &a) in sum.iter_mut().zip(g.adjacency()) {
            *s += u32::from(a);
        }
    }
    let count = sample.len() as f64;
    Ok(WeightedMatrix {
        n,
        w: sum.into_iter().map(|s| f64::from(s) / count).collect(),
    })
}

/// Keeps entry `(i, j)` exactly when `m[i][j] > 1/2`. Ties go to 0 and the
/// diagonal is always cleared. Only the upper triangle is read.
pub fn threshold_half(m: &WeightedMatrix) -> Graph {
    threshold_at(m, 0.5)
}

pub fn threshold_at(m: &WeightedMatrix, cut: f64) -> Graph {
    let n = m.n();
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if m.get(i, j) > cut {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Degree frequencies `f[k] = n_k / n` for `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeHistogram {
    f: Vec<f64>,
}

impl DegreeHistogram {
    pub fn n(&self) -> usize {
        self.f.len() - 1
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.f
    }
}

pub fn degree_histogram(g: &Graph) -> DegreeHistogram {
    let n = g.n();
    let mut counts = vec![0usize; n + 1];
    for d in g.degrees() {
        counts[d] += 1;
    }
    let total = n.max(1) as f64;
    DegreeHistogram {
        f: counts.into_iter().map(|c| c as f64 / total).collect(),
    }
}

/// `sum_k f[k] ln(f[k] / max(g[k], eps))` over bins with `f[k] > 0`, using
/// the default [`KL_EPSILON`].
pub fn kl_divergence(f: &DegreeHistogram, g: &DegreeHistogram) -> Result<f64> {
    kl_divergence_with(f, g, KL_EPSILON)
}

pub fn kl_divergence_with(f: &DegreeHistogram, g: &DegreeHistogram, eps: f64) -> Result<f64> {
    if f.n() != g.n() {
        return Err(Error::SizeMismatch {
            expected: f.n(),
            found: g.n(),
        });
    }
    let mut total = 0.0;
    for (&fk, &gk) in f.f.iter().zip(&g.f) {
        if fk > 0.0 {
            // Identical bins contribute exactly zero.
            if fk != gk {
                total += fk * (fk / gk.max(eps)).ln();
            }
        }
    }
    Ok(total)
}

/// Writes graphs in the line format: a header `n=<n> count=<rows>` followed
/// by one upper-triangle bit string per graph.
pub fn write_graphs<W: Write>(mut out: W, n: usize, graphs: &[Graph]) -> std::io::Result<()> {
    writeln!(out, "n={n} count={}", graphs.len())?;
    for g in graphs {
        writeln!(out, "{}", g.to_upper_bits())?;
    }
    Ok(())
}

pub fn read_graphs<R: BufRead>(input: R) -> Result<Vec<Graph>> {
    let mut lines = input.lines();
    let bad = |reason: String| Error::InvalidGraph(reason);
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let (n, count) = parse_header(&header).ok_or_else(|| bad(format!("bad header {header:?}")))?;
    let mut graphs = Vec::with_capacity(count);
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        graphs.push(Graph::from_upper_bits(n, line.trim_end())?);
    }
    if graphs.len() != count {
        return Err(bad(format!("header declares {count} graphs, found {}", graphs.len())));
    }
    Ok(graphs)
}

fn parse_header(header: &str) -> Option<(usize, usize)> {
    let mut parts = header.split_whitespace();
    let n = parts.next()?.strip_prefix("n=")?.parse().ok()?;
    let count = parts.next()?.strip_prefix("count=")?.parse().ok()?;
    parts.next().is_none().then_some((n, count))
}
