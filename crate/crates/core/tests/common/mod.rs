#![allow(dead_code)]

use mobnet_core::nn::ModelParams;
use mobnet_core::{GeoLevel, Matrix, MobilityNetwork, RegionId};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn tract(i: usize) -> RegionId {
    RegionId::parse(&format!("17031{:06}", i + 1), GeoLevel::Tract).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut StdRng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Directed integer-weighted graph; each ordered pair is an edge with
/// probability `density`.
pub fn random_weights(n: usize, density: f64, rng: &mut StdRng) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if rng.gen::<f64>() < density {
                w[(i, j)] = rng.gen_range(1..20) as f64;
            }
        }
    }
    w
}

pub fn network(weights: &Matrix) -> MobilityNetwork {
    let regions = (0..weights.rows()).map(tract).collect();
    MobilityNetwork::from_dense(regions, weights).unwrap()
}

pub fn random_network(n: usize, density: f64, rng: &mut StdRng) -> MobilityNetwork {
    network(&random_weights(n, density, rng))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst elementwise relative error between analytic and central-difference
/// gradients. `eval` must record the loss, back-propagate it into the
/// parameters returned by `params`, and return its value.
pub fn gradient_check<M>(
    model: &mut M,
    params: fn(&mut M) -> &mut ModelParams,
    mut eval: impl FnMut(&mut M) -> f64,
) -> f64 {
    const H: f64 = 1e-5;
    params(model).zero_grads();
    eval(model);
    let ids: Vec<_> = params(model).ids().collect();
    let analytic: Vec<Matrix> = ids
        .iter()
        .map(|&id| {
            let p = params(model);
            p.grad(id).cloned().unwrap_or_else(|| {
                let (r, c) = p.value(id).shape();
                Matrix::zeros(r, c)
            })
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (k, &id) in ids.iter().enumerate() {
        let len = params(model).value(id).as_slice().len();
        for e in 0..len {
            let orig = params(model).value(id).as_slice()[e];
            params(model).value_mut(id).as_mut_slice()[e] = orig + H;
            let up = eval(model);
            params(model).value_mut(id).as_mut_slice()[e] = orig - H;
            let down = eval(model);
            params(model).value_mut(id).as_mut_slice()[e] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic[k].as_slice()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    params(model).zero_grads();
    worst
}

/// Fills every parameter with uniform noise so no bias sits at zero and
/// ReLU kinks are unlikely to be hit by the finite differences.
pub fn jitter_params(params: &mut ModelParams, scale: f64, rng: &mut StdRng) {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for v in params.value_mut(id).as_mut_slice() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending, with
/// eigenvectors as columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].partial_cmp(&m[(y, y)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &v.column(i));
    }
    (values, vectors)
}

/// Dense `D^{-1/2}(T(A)+I)D^{-1/2}` with `T` applied, `½(A+Aᵀ)` taken when
/// `symmetrize`.
pub fn dense_normalized(a: &Matrix, transform: fn(f64) -> f64, symmetrize: bool) -> Matrix {
    let n = a.rows();
    let mut t = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] = if symmetrize {
                0.5 * (transform(a[(i, j)]) + transform(a[(j, i)]))
            } else {
                transform(a[(i, j)])
            };
        }
        t[(i, i)] += 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| t[(i, j)]).sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = t[(i, j)] / (deg[i] * deg[j]).sqrt();
        }
    }
    out
}

pub fn log1p(w: f64) -> f64 {
    w.ln_1p()
}

/// Best agreement between two labelings over all relabelings of `k` classes.
pub fn permutation_agreement(truth: &[usize], pred: &[usize], k: usize) -> f64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    perms(k)
        .into_iter()
        .map(|p| truth.iter().zip(pred).filter(|(t, q)| p[**q] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

pub fn leaky(v: f64, slope: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        slope * v
    }
}

/// `σ(Â H W + B)` by explicit triple loops.
pub fn dense_gcn(a_hat: &Matrix, h: &Matrix, w: &Matrix, b: &Matrix, relu_out: bool) -> Matrix {
    let n = a_hat.rows();
    let mut ah = Matrix::zeros(n, h.cols());
    for i in 0..n {
        for j in 0..n {
            for k in 0..h.cols() {
                ah[(i, k)] += a_hat[(i, j)] * h[(j, k)];
            }
        }
    }
    let mut out = Matrix::zeros(n, w.cols());
    for i in 0..n {
        for c in 0..w.cols() {
            let mut v = b[(0, c)];
            for k in 0..w.rows() {
                v += ah[(i, k)] * w[(k, c)];
            }
            out[(i, c)] = if relu_out { relu(v) } else { v };
        }
    }
    out
}

/// Neighbors of `i` in the symmetrized graph, plus `i` itself.
pub fn neighbors(a: &Matrix, i: usize) -> Vec<usize> {
    (0..a.rows()).filter(|&j| j == i || a[(i, j)] > 0.0 || a[(j, i)] > 0.0).collect()
}

pub fn project(h: &Matrix, w: &Matrix, i: usize) -> Vec<f64> {
    (0..w.cols())
        .map(|c| (0..w.rows()).map(|k| h[(i, k)] * w[(k, c)]).sum())
        .collect()
}

/// Per-node attention: score every neighbor with `aᵀ[Wh_i ‖ Wh_j]`,
/// softmax, aggregate, then combine heads.
pub fn brute_gat(a: &Matrix, h: &Matrix, heads: &[(Matrix, Matrix)], relu_out: bool, concat: bool, slope: f64) -> (Matrix, Vec<Vec<Vec<f64>>>) {
    let n = a.rows();
    let width = heads[0].0.cols();
    let mut per_head = Vec::new();
    let mut alphas = Vec::new();
    for (w, att) in heads {
        let mut out = Matrix::zeros(n, width);
        let mut node_alpha = Vec::new();
        for i in 0..n {
            let zi = project(h, w, i);
            let nb = neighbors(a, i);
            let scores: Vec<f64> = nb
                .iter()
                .map(|&j| {
                    let zj = project(h, w, j);
                    let cat: Vec<f64> = zi.iter().chain(zj.iter()).copied().collect();
                    leaky(cat.iter().zip(att.as_slice()).map(|(x, y)| x * y).sum(), slope)
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = ex.iter().sum();
            let alpha: Vec<f64> = ex.iter().map(|e| e / z).collect();
            for (&j, &al) in nb.iter().zip(&alpha) {
                let zj = project(h, w, j);
                for c in 0..width {
                    out[(i, c)] += al * zj[c];
                }
            }
            node_alpha.push(alpha);
        }
        per_head.push(out);
        alphas.push(node_alpha);
    }
    let k = heads.len();
    let out = if concat {
        let mut out = Matrix::zeros(n, width * k);
        for (hk, m) in per_head.iter().enumerate() {
            for i in 0..n {
                for c in 0..width {
                    let v = m[(i, c)];
                    out[(i, hk * width + c)] = if relu_out { relu(v) } else { v };
                }
            }
        }
        out
    } else {
        let mut out = Matrix::zeros(n, width);
        for i in 0..n {
            for c in 0..width {
                let v = per_head.iter().map(|m| m[(i, c)]).sum::<f64>() / k as f64;
                out[(i, c)] = if relu_out { relu(v) } else { v };
            }
        }
        out
    };
    (out, alphas)
}

/// Largest |eigenvalue| of a symmetric matrix by power iteration on M².
pub fn spectral_radius(m: &Matrix) -> f64 {
    let n = m.rows();
    let m2 = m.matmul(m).unwrap();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m2[(i, j)] * x[j]).sum()).collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / norm).collect();
    }
    lambda.sqrt()
}

pub fn connected_random(n: usize, r: &mut StdRng) -> Matrix {
    let mut a = random_weights(n, 0.3, r);
    for i in 0..n - 1 {
        if a[(i, i + 1)] == 0.0 {
            a[(i, i + 1)] = 1.0;
        }
    }
    a
}
