//! Independent reference implementations shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use fgl::minicnn::Tensor3;
use fgl::{Graph, WeightedMatrix};
use rand::Rng;

/// Cyclic Jacobi rotations until every off-diagonal entry is negligible.
/// Returns eigenvalues sorted ascending.
pub fn jacobi_eigenvalues(m: &WeightedMatrix) -> Vec<f64> {
    let n = m.n();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() < 1e-15 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> WeightedMatrix {
    let mut m = WeightedMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Connectivity by union-find over the edge list.
pub fn connected_by_union_find(g: &Graph) -> bool {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let r = root(&mut parent, 0);
    (0..n).all(|v| root(&mut parent, v) == r)
}

/// Direct 3x3 zero-padded cross-correlation, kernel `[ky][kx][cin][cout]`.
pub fn naive_conv3x3(x: &Tensor3<f64>, kernel: &[f64], bias: &[f64]) -> Tensor3<f64> {
    let (h, w, cin) = x.shape();
    let cout = bias.len();
    Tensor3::from_fn(h, w, cout, |y, xx, co| {
        let mut acc = bias[co];
        for ky in 0..3 {
            for kx in 0..3 {
                let iy = y as isize + ky as isize - 1;
                let ix = xx as isize + kx as isize - 1;
                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                    continue;
                }
                for ci in 0..cin {
                    acc += kernel[((ky * 3 + kx) * cin + ci) * cout + co] * x.get(iy as usize, ix as usize, ci);
                }
            }
        }
        acc
    })
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: &mut impl FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, step: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + step;
    let up = f(x);
    x[i] = orig - step;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * step)
}

/// Relative error with an absolute floor so that near-zero gradients are
/// compared on an absolute scale.
pub fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter of a `side x side` network of base width `base`,
/// in f64, against a BCE loss with a random target. Returns
/// `(max error, parameter count)`.
pub fn gradient_check(side: usize, base: usize, seed: u64, step: f64) -> (f64, usize) {
    use fgl::ensembles::RngSeed;
    use fgl::minicnn::{bce_loss, ModelParams};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::<f64>::init(side, base, RngSeed::new(seed, 0)).unwrap();
    // Small positive biases keep ReLU units away from their kink.
    for l in 0..params.layers().len() {
        let range = params.layer_range(l);
        let wc = params.layers()[l].weight_count();
        for v in &mut params.values_mut()[range.start + wc..range.end] {
            *v = rng.gen_range(0.01..0.1);
        }
    }
    let input = Tensor3::from_fn(side, side, 1, |_, _, _| rng.gen_range(0.0..1.0));
    let target = Tensor3::from_fn(side, side, 1, |_, _, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });

    let (out, cache) = params.forward(&input).unwrap();
    let (_, dy) = bce_loss(&out, &target).unwrap();
    let analytic = params.backward(&cache, &dy).unwrap();

    let layers = params.layers().to_vec();
    let mut values = params.values().to_vec();
    let mut loss_at = |v: &[f64]| {
        let p = ModelParams::from_parts(side, layers.clone(), v.to_vec()).unwrap();
        let out = p.predict(&input).unwrap();
        bce_loss(&out, &target).unwrap().0
    };
    let mut worst = 0.0f64;
    for i in 0..values.len() {
        let numeric = central_difference(&mut loss_at, &mut values, i, step);
        worst = worst.max(rel_error(analytic[i], numeric, 1e-6));
    }
    (worst, values.len())
}
