//! Dense symmetric eigenvalues and the three graph (pseudo)distances.
//!
//! Eigenvalues come from a Householder reduction to tridiagonal form
//! followed by implicit-shift QL iteration. Only eigenvalues are computed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedMatrix};

const MAX_QL_ITERATIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SortConvention {
    AdjacencyDescending,
    LaplacianAscending,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumVector {
    vals: Vec<f64>,
    convention: SortConvention,
}

impl SpectrumVector {
    pub fn new(mut vals: Vec<f64>, convention: SortConvention) -> Self {
        match convention {
            SortConvention::AdjacencyDescending => vals.sort_by(|a, b| b.total_cmp(a)),
            SortConvention::LaplacianAscending => vals.sort_by(|a, b| a.total_cmp(b)),
        }
        SpectrumVector { vals, convention }
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn convention(&self) -> SortConvention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Euclidean distance between two spectra of the same length.
    pub fn l2_distance(&self, other: &SpectrumVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// All eigenvalues of a real symmetric matrix, in no particular order.
///
/// The input is symmetrized as `(m + m^T) / 2`; asymmetry larger than
/// `1e-12` times the largest entry is rejected.
pub fn sym_eigenvalues(m: &WeightedMatrix) -> Result<Vec<f64>> {
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidMatrix("dimension 0".into()));
    }
    let scale = m.as_slice().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m.max_asymmetry() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidMatrix(format!(
            "matrix is not symmetric (asymmetry {:e})",
            m.max_asymmetry()
        )));
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    let (mut d, mut e) = tridiagonalize(&mut a, n);
    tridiagonal_ql(&mut d, &mut e)?;
    Ok(d)
}

/// Householder reduction of the symmetric matrix in `a` (row-major, `n x n`,
/// destroyed) to tridiagonal form. Returns the diagonal and the subdiagonal,
/// with the subdiagonal stored in `e[1..n]` and `e[0] = 0`.
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. On return `d` holds
/// the eigenvalues; `e` is destroyed.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(Error::InvalidMatrix("QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

pub fn adjacency_spectrum(g: &Graph) -> SpectrumVector {
    // A valid graph is exactly symmetric, so this cannot fail for n > 0.
    let vals = if g.n() == 0 {
        Vec::new()
    } else {
        sym_eigenvalues(&g.to_weighted()).expect("adjacency matrix is symmetric")
    };
    SpectrumVector::new(vals, SortConvention::AdjacencyDescending)
}

pub fn laplacian_spectrum(g: &Graph) -> SpectrumVector {
    let vals = if g.n() == 0 {
        Vec::new()
    } else {
        sym_eigenvalues(&g.laplacian()).expect("laplacian is symmetric")
    };
    SpectrumVector::new(vals, SortConvention::LaplacianAscending)
}

fn check_same_size(g1: &Graph, g2: &Graph) -> Result<()> {
    if g1.n() != g2.n() {
        return Err(Error::SizeMismatch {
            expected: g1.n(),
            found: g2.n(),
        });
    }
    Ok(())
}

pub fn d_adjacency(g1: &Graph, g2: &Graph) -> Result<f64> {
    check_same_size(g1, g2)?;
    adjacency_spectrum(g1).l2_distance(&adjacency_spectrum(g2))
}

pub fn d_laplacian(g1: &Graph, g2: &Graph) -> Result<f64> {
    check_same_size(g1, g2)?;
    laplacian_spectrum(g1).l2_distance(&laplacian_spectrum(g2))
}

/// Number of differing entries in the strict upper triangle.
pub fn d_hamming(g1: &Graph, g2: &Graph) -> Result<f64> {
    check_same_size(g1, g2)?;
    Ok(g1
        .upper_triangle()
        .zip(g2.upper_triangle())
        .filter(|(a, b)| a != b)
        .count() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Hamming,
    AdjacencySpectral,
    LaplacianSpectral,
}

impl Metric {
    pub fn distance(self, g1: &Graph, g2: &Graph) -> Result<f64> {
        match self {
            Metric::Hamming => d_hamming(g1, g2),
            Metric::AdjacencySpectral => d_adjacency(g1, g2),
            Metric::LaplacianSpectral => d_laplacian(g1, g2),
        }
    }

    /// Maps a graph to the point whose Euclidean (or, for Hamming, L1)
    /// distance realizes this metric, so repeated distance evaluations can
    /// skip recomputing spectra.
    pub(crate) fn embed(self, g: &Graph) -> Vec<f64> {
        match self {
            Metric::Hamming => g.upper_triangle().map(|b| if b { 1.0 } else { 0.0 }).collect(),
            Metric::AdjacencySpectral => adjacency_spectrum(g).vals,
            Metric::LaplacianSpectral => laplacian_spectrum(g).vals,
        }
    }

    pub(crate) fn embedded_distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Hamming => a.iter().zip(b).filter(|(x, y)| x != y).count() as f64,
            _ => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Hamming => "hamming",
            Metric::AdjacencySpectral => "adjacency",
            Metric::LaplacianSpectral => "laplacian",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(Metric::Hamming),
            "adjacency" => Ok(Metric::AdjacencySpectral),
            "laplacian" => Ok(Metric::LaplacianSpectral),
            other => Err(Error::param("metric", format!("unknown metric {other:?}"))),
        }
    }
}
