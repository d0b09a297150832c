//! Initial node embeddings and k-means clustering.
//!
//! Four families are produced from a [`MobilityNetwork`]:
//!
//! * **spatial**: standardized region centroid longitude/latitude;
//! * **svd**: rows of `U_d Σ_d^{1/2}` from the rank-`d` SVD of the
//!   transformed adjacency;
//! * **laplacian**: eigenvectors of `I − D^{-1/2} Ã D^{-1/2}` (symmetrized,
//!   self-looped `Ã`) after the trivial one;
//! * **random walk**: PageRank vectors at several damping factors, or
//!   `c`-step return probabilities.
//!
//! Generators other than spatial return raw values; call
//! [`EmbeddingMatrix::standardized`] before feeding a model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyOptions, MobilityNetwork, WeightTransform};
use crate::linalg::{self, Csr, Matrix, SymmetricEigen};
use crate::math;
use crate::nn::seeded_rng;
use crate::region::RegionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbeddingMethod {
    Spatial,
    Svd,
    Laplacian,
    RandomWalk,
    VnnTrained,
    GnnHidden,
    /// Attribute columns or other externally supplied features.
    Features,
}

impl EmbeddingMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spatial => "spatial",
            Self::Svd => "svd",
            Self::Laplacian => "laplacian",
            Self::RandomWalk => "randomwalk",
            Self::VnnTrained => "vnn_trained",
            Self::GnnHidden => "gnn_hidden",
            Self::Features => "features",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "spatial" => Self::Spatial,
            "svd" => Self::Svd,
            "laplacian" | "le" => Self::Laplacian,
            "randomwalk" | "random_walk" => Self::RandomWalk,
            "vnn_trained" => Self::VnnTrained,
            "gnn_hidden" => Self::GnnHidden,
            "features" => Self::Features,
            _ => return None,
        })
    }
}

/// Per-column mean and standard deviation used for standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    /// Population (divide-by-N) moments of each column.
    pub fn of(m: &Matrix) -> Self {
        let n = m.rows().max(1) as f64;
        let mut mean = vec![0.0; m.cols()];
        for r in 0..m.rows() {
            for (acc, v) in mean.iter_mut().zip(m.row(r)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; m.cols()];
        for r in 0..m.rows() {
            for ((acc, v), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var.into_iter().map(|v| math::sqrt(v / n)).collect();
        Self { mean, std }
    }

    /// `(x − mean) / std`; columns with negligible spread map to 0.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..m.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if is_constant(self.std[c], self.mean[c]) {
                    0.0
                } else {
                    (*v - self.mean[c]) / self.std[c]
                };
            }
        }
        out
    }
}

fn is_constant(std: f64, mean: f64) -> bool {
    std <= 1e-12 * (1.0 + math::abs(mean))
}

/// `N×d` node feature table; row `i` belongs to node `i` of the source network.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
    method: EmbeddingMethod,
    /// Set once the values have been standardized.
    stats: Option<ColumnStats>,
}

impl EmbeddingMatrix {
    pub fn new(values: Matrix, method: EmbeddingMethod) -> Self {
        Self {
            values,
            method,
            stats: None,
        }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn method(&self) -> EmbeddingMethod {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    /// Statistics of the raw values, present on standardized embeddings.
    pub fn stats(&self) -> Option<&ColumnStats> {
        self.stats.as_ref()
    }

    pub fn is_standardized(&self) -> bool {
        self.stats.is_some()
    }

    /// Column-standardized copy (mean 0, population variance 1; constant
    /// columns left at 0). Idempotent.
    pub fn standardized(&self) -> Self {
        if self.stats.is_some() {
            return self.clone();
        }
        let stats = ColumnStats::of(&self.values);
        Self {
            values: stats.apply(&self.values),
            method: self.method,
            stats: Some(stats),
        }
    }
}

/// Standardized centroid coordinates `(lon, lat)` for every node.
pub fn spatial_embedding(
    net: &MobilityNetwork,
    centroids: &BTreeMap<RegionId, (f64, f64)>,
) -> Result<EmbeddingMatrix> {
    let missing: Vec<String> = net
        .regions()
        .iter()
        .filter(|r| !centroids.contains_key(*r))
        .map(|r| format!("{r}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Missing(format!(
            "centroids for {} region(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let mut values = Matrix::zeros(net.node_count(), 2);
    for (i, r) in net.regions().iter().enumerate() {
        let (lon, lat) = centroids[r];
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::NonFinite(format!("centroid of {r}")));
        }
        values[(i, 0)] = lon;
        values[(i, 1)] = lat;
    }
    Ok(EmbeddingMatrix::new(values, EmbeddingMethod::Spatial).standardized())
}

/// Leading `d` singular triplets of a square matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl TruncatedSvd {
    /// `U_d Σ_d V_dᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, v) in us.row_mut(r).iter_mut().enumerate() {
                *v *= self.singular_values[c];
            }
        }
        us.matmul_t(&self.v).expect("consistent factor shapes")
    }
}

/// Rank-`d` SVD with the column-sign convention applied jointly to `U` and `V`.
pub fn truncated_svd(m: &Matrix, d: usize) -> Result<TruncatedSvd> {
    if d == 0 || d > m.cols() {
        return Err(Error::invalid(format!(
            "svd rank d={d} must lie in 1..={}",
            m.cols()
        )));
    }
    let full = linalg::svd(m, true)?;
    let full_v = full.v.expect("requested");
    let mut u = Matrix::zeros(m.rows(), d);
    let mut v = Matrix::zeros(m.cols(), d);
    for c in 0..d {
        let uc = full.u.column(c);
        let vc = full_v.column(c);
        let flip = sign_of_largest(&uc) < 0.0;
        let s = if flip { -1.0 } else { 1.0 };
        u.set_column(c, &uc.iter().map(|x| s * x).collect::<Vec<_>>());
        v.set_column(c, &vc.iter().map(|x| s * x).collect::<Vec<_>>());
    }
    Ok(TruncatedSvd {
        u,
        singular_values: full.singular_values[..d].to_vec(),
        v,
    })
}

fn sign_of_largest(col: &[f64]) -> f64 {
    let mut best = 0.0;
    let mut val = 0.0;
    for &x in col {
        if math::abs(x) > best {
            best = math::abs(x);
            val = x;
        }
    }
    if val < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Rows of `U_d Σ_d^{1/2}` for the transformed (directed, loop-free) adjacency.
pub fn svd_embedding(
    net: &MobilityNetwork,
    d: usize,
    transform: WeightTransform,
) -> Result<EmbeddingMatrix> {
    let n = net.node_count();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("svd embedding d={d} must lie in 1..={n}")));
    }
    let a = net.transformed(&AdjacencyOptions {
        transform,
        symmetrize: false,
        self_loops: false,
    });
    let full = linalg::svd(&a.to_dense(), false)?;
    let mut u = Matrix::zeros(n, d);
    for c in 0..d {
        u.set_column(c, &full.u.column(c));
    }
    linalg::fix_column_signs(&mut u);
    for r in 0..n {
        for (c, v) in u.row_mut(r).iter_mut().enumerate() {
            *v *= math::sqrt(full.singular_values[c]);
        }
    }
    Ok(EmbeddingMatrix::new(u, EmbeddingMethod::Svd))
}

/// Symmetric normalized Laplacian `I − D^{-1/2} Ã D^{-1/2}` with `Ã` the
/// transformed, symmetrized, self-looped adjacency.
pub fn normalized_laplacian(net: &MobilityNetwork, transform: WeightTransform) -> Matrix {
    let a_hat = crate::graph::normalize_adjacency(net, true, transform).to_dense();
    let n = a_hat.rows();
    let mut l = a_hat.scale(-1.0);
    for i in 0..n {
        l[(i, i)] += 1.0;
    }
    l
}

/// Full eigendecomposition of the normalized Laplacian, eigenvalues ascending.
pub fn laplacian_spectrum(net: &MobilityNetwork, transform: WeightTransform) -> Result<SymmetricEigen> {
    linalg::symmetric_eigen(&normalized_laplacian(net, transform))
}

/// Eigenvectors 2..=d+1 of the normalized Laplacian (the first, proportional
/// to `D^{1/2}·1`, is skipped). Columns are orthonormal with the
/// largest-magnitude entry positive.
pub fn laplacian_embedding(
    net: &MobilityNetwork,
    d: usize,
    transform: WeightTransform,
) -> Result<EmbeddingMatrix> {
    let n = net.node_count();
    if d == 0 || d >= n {
        return Err(Error::invalid(format!(
            "laplacian embedding d={d} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let eig = laplacian_spectrum(net, transform)?;
    let mut values = Matrix::zeros(n, d);
    for c in 0..d {
        values.set_column(c, &eig.vectors.column(c + 1));
    }
    linalg::fix_column_signs(&mut values);
    Ok(EmbeddingMatrix::new(values, EmbeddingMethod::Laplacian))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RandomWalkVariant {
    /// Column `c` is the PageRank vector at damping `α_c`, linearly spaced
    /// over `[0.05, 0.95]` (a single column uses 0.85).
    #[default]
    PagerankMultiDamping,
    /// Column `c` is `diag(P^c)`: the probability of being back after `c` steps.
    KStepLanding,
}

/// Row-stochastic walk over the transformed directed adjacency. Rows without
/// out-weight jump uniformly.
#[derive(Debug, Clone)]
pub struct Transition {
    p: Csr,
    dangling: Vec<bool>,
}

impl Transition {
    pub fn new(net: &MobilityNetwork, transform: WeightTransform) -> Self {
        let a = net.transformed(&AdjacencyOptions {
            transform,
            symmetrize: false,
            self_loops: false,
        });
        let sums = a.row_sums();
        let rows = (0..a.n_rows())
            .map(|i| a.row(i).map(|(j, w)| (j, w / sums[i])).collect())
            .collect();
        Self {
            p: Csr::from_rows(a.n_cols(), rows).expect("same pattern"),
            dangling: sums.iter().map(|s| *s <= 0.0).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.p.n_rows()
    }

    /// Dense `P`, dangling rows filled uniformly.
    pub fn to_dense(&self) -> Matrix {
        let n = self.node_count();
        let mut m = self.p.to_dense();
        for i in 0..n {
            if self.dangling[i] {
                m.row_mut(i).iter_mut().for_each(|v| *v = 1.0 / n as f64);
            }
        }
        m
    }

    /// `P · X`.
    fn apply(&self, x: &Matrix) -> Matrix {
        let n = self.node_count() as f64;
        let mut out = self.p.matmul_dense(x).expect("square walk matrix");
        if self.dangling.iter().any(|d| *d) {
            let mut colmean = vec![0.0; x.cols()];
            for r in 0..x.rows() {
                for (acc, v) in colmean.iter_mut().zip(x.row(r)) {
                    *acc += v / n;
                }
            }
            for (i, _) in self.dangling.iter().enumerate().filter(|(_, d)| **d) {
                out.row_mut(i).copy_from_slice(&colmean);
            }
        }
        out
    }
}

pub const PAGERANK_TOLERANCE: f64 = 1e-10;
pub const PAGERANK_MAX_ITER: usize = 10_000;

/// PageRank with uniform teleportation by power iteration until the L1
/// change drops below `tolerance`.
pub fn pagerank(walk: &Transition, damping: f64, tolerance: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::invalid(format!("damping {damping} outside [0, 1)")));
    }
    let n = walk.node_count();
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    for _ in 0..max_iter {
        let dangling_mass: f64 = x
            .iter()
            .zip(&walk.dangling)
            .filter(|(_, d)| **d)
            .map(|(v, _)| v)
            .sum();
        let base = (1.0 - damping) * uniform + damping * dangling_mass * uniform;
        let mut next = vec![base; n];
        for (i, xi) in x.iter().enumerate() {
            for (j, p) in walk.p.row(i) {
                next[j] += damping * xi * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let residual: f64 = next.iter().zip(&x).map(|(a, b)| math::abs(a - b)).sum();
        x = next;
        if residual < tolerance {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        context: format!("pagerank at damping {damping}"),
        iterations: max_iter,
    })
}

/// Damping factors used by the multi-damping embedding.
pub fn damping_schedule(d: usize) -> Vec<f64> {
    match d {
        0 => Vec::new(),
        1 => vec![0.85],
        _ => (0..d)
            .map(|c| 0.05 + 0.9 * c as f64 / (d - 1) as f64)
            .collect(),
    }
}

pub fn random_walk_embedding(
    net: &MobilityNetwork,
    d: usize,
    variant: RandomWalkVariant,
    transform: WeightTransform,
) -> Result<EmbeddingMatrix> {
    if d == 0 {
        return Err(Error::invalid("random walk embedding needs d >= 1"));
    }
    let walk = Transition::new(net, transform);
    let n = net.node_count();
    let mut values = Matrix::zeros(n, d);
    match variant {
        RandomWalkVariant::PagerankMultiDamping => {
            for (c, alpha) in damping_schedule(d).into_iter().enumerate() {
                let pr = pagerank(&walk, alpha, PAGERANK_TOLERANCE, PAGERANK_MAX_ITER)?;
                values.set_column(c, &pr);
            }
        }
        RandomWalkVariant::KStepLanding => {
            let mut power = Matrix::identity(n);
            for c in 0..d {
                power = walk.apply(&power);
                for i in 0..n {
                    values[(i, c)] = power[(i, i)];
                }
            }
        }
    }
    Ok(EmbeddingMatrix::new(values, EmbeddingMethod::RandomWalk))
}

/// Hard cluster assignment from k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// `Σ_i ‖x_i − c_{label(i)}‖²` for the final labels and centroids.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn inertia_of(data: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(data.row(i), centroids.row(l)))
        .sum()
}

/// Lloyd's algorithm from a k-means++ start. Stops at an assignment fixpoint
/// or after `max_iter` iterations. Empty clusters are re-seeded with the
/// point farthest from its centroid.
pub fn kmeans(data: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    let n = data.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} must lie in 1..={n}")));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut centroids = kmeans_plus_plus(data, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let current = labels[i];
            let mut best = current;
            let mut best_d = if current == usize::MAX {
                f64::INFINITY
            } else {
                sq_dist(data.row(i), centroids.row(current))
            };
            for c in 0..k {
                let dist = sq_dist(data.row(i), centroids.row(c));
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            if best != current {
                labels[i] = best;
                changed = true;
            }
        }
        reseed_empty(data, &mut centroids, &mut labels, k);
        centroids = centroid_update(data, &labels, k, &centroids);
        trace.push(inertia_of(data, &centroids, &labels));
        if !changed {
            break;
        }
    }
    Ok(ClusterAssignment {
        inertia: inertia_of(data, &centroids, &labels),
        labels,
        centroids,
        inertia_trace: trace,
        iterations,
    })
}

/// Best of `restarts` runs (seeds `seed, seed+1, …`) by inertia.
pub fn kmeans_restarts(
    data: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterAssignment> {
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans(data, k, seed.wrapping_add(r as u64), max_iter)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_plus_plus<R: Rng + ?Sized>(data: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = data.rows();
    let mut centroids = Matrix::zeros(k, data.cols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in closest.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
                chosen = i;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(pick)));
        }
    }
    centroids
}

fn reseed_empty(data: &Matrix, centroids: &mut Matrix, labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|c| *c == 0) else { return };
        // Take the worst-fit point from a cluster that can spare one.
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(data.row(a), centroids.row(labels[a]));
                let db = sq_dist(data.row(b), centroids.row(labels[b]));
                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
            });
        let Some(i) = donor else { return };
        labels[i] = empty;
        centroids.row_mut(empty).copy_from_slice(data.row(i));
    }
}

fn centroid_update(data: &Matrix, labels: &[usize], k: usize, previous: &Matrix) -> Matrix {
    let mut sums = Matrix::zeros(k, data.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums.row_mut(c).copy_from_slice(previous.row(c));
        } else {
            sums.row_mut(c).iter_mut().for_each(|v| *v /= counts[c] as f64);
        }
    }
    sums
}

/// Fraction of items on which two labelings agree under the best one-to-one
/// relabeling of `predicted` (exhaustive over permutations; `k ≤ 8`).
pub fn best_permutation_agreement(truth: &[usize], predicted: &[usize], k: usize) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::shape("label vectors", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("label vectors".into()));
    }
    if k == 0 || k > 8 {
        return Err(Error::invalid(format!("permutation search supports 1 <= k <= 8, got {k}")));
    }
    if truth.iter().chain(predicted).any(|&l| l >= k) {
        return Err(Error::invalid("label outside 0..k"));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[p][t] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits: usize = (0..k).map(|c| confusion[c][p[c]]).sum();
        best = best.max(hits);
    });
    Ok(best as f64 / truth.len() as f64)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}
