//! The weighted directed commute graph and the propagation operators built
//! from it.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Csr, Matrix};
use crate::math;
use crate::region::{FlowRecord, RegionId};

/// Elementwise transform applied to flow counts before any graph operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WeightTransform {
    Raw,
    #[default]
    Log1p,
    Binary,
}

impl WeightTransform {
    #[inline]
    pub fn apply(self, w: f64) -> f64 {
        match self {
            WeightTransform::Raw => w,
            WeightTransform::Log1p => math::ln_1p(w),
            WeightTransform::Binary => {
                if w > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightTransform::Raw => "raw",
            WeightTransform::Log1p => "log1p",
            WeightTransform::Binary => "binary",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(Self::Raw),
            "log1p" => Some(Self::Log1p),
            "binary" => Some(Self::Binary),
            _ => None,
        }
    }
}

/// How the adjacency is materialized: `Ã = sym(T(A)) (+ I)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdjacencyOptions {
    pub transform: WeightTransform,
    /// Replace `T(A)` by `½(T(A) + T(A)ᵀ)`.
    pub symmetrize: bool,
    /// Add the identity.
    pub self_loops: bool,
}

impl Default for AdjacencyOptions {
    fn default() -> Self {
        Self {
            transform: WeightTransform::Log1p,
            symmetrize: true,
            self_loops: true,
        }
    }
}

/// Weighted directed region graph; edge `i → j` carries commuters living in
/// region `i` and working in region `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityNetwork {
    regions: Vec<RegionId>,
    index: BTreeMap<RegionId, usize>,
    adjacency: Csr,
}

/// Result of [`build_network`].
#[derive(Debug, Clone)]
pub struct NetworkBuild {
    pub network: MobilityNetwork,
    /// Flow records whose endpoints fall outside a supplied universe.
    pub dropped_flows: usize,
}

/// Assembles the network from aggregated flows. Without a `universe` the
/// node set is the union of flow endpoints; with one it is exactly the
/// universe and flows touching other regions are dropped and counted.
/// Nodes are ordered by region id.
pub fn build_network(flows: &[FlowRecord], universe: Option<&[RegionId]>) -> Result<NetworkBuild> {
    let mut regions: Vec<RegionId> = match universe {
        Some(u) => u.to_vec(),
        None => flows
            .iter()
            .flat_map(|f| [f.origin.clone(), f.destination.clone()])
            .collect(),
    };
    regions.sort();
    regions.dedup();
    if regions.is_empty() {
        return Err(Error::Empty("no nodes: flow list and region universe are empty".into()));
    }
    let index: BTreeMap<RegionId, usize> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| (r.clone(), i))
        .collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); regions.len()];
    let mut dropped = 0;
    for f in flows {
        match (index.get(&f.origin), index.get(&f.destination)) {
            (Some(&i), Some(&j)) => rows[i].push((j, f.count as f64)),
            _ => dropped += 1,
        }
    }
    let adjacency = Csr::from_rows(regions.len(), rows)?;
    Ok(NetworkBuild {
        network: MobilityNetwork {
            regions,
            index,
            adjacency,
        },
        dropped_flows: dropped,
    })
}

impl MobilityNetwork {
    /// Network from a dense non-negative weight matrix; `regions[i]` names
    /// row/column `i`. Regions must be unique.
    pub fn from_dense(regions: Vec<RegionId>, weights: &Matrix) -> Result<Self> {
        let n = regions.len();
        if n == 0 {
            return Err(Error::Empty("no nodes".into()));
        }
        if weights.shape() != (n, n) {
            return Err(Error::shape(
                "network weight matrix",
                alloc::format!("{n}x{n}"),
                alloc::format!("{}x{}", weights.rows(), weights.cols()),
            ));
        }
        if weights.as_slice().iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("adjacency weights must be finite and non-negative"));
        }
        let mut index = BTreeMap::new();
        for (i, r) in regions.iter().enumerate() {
            if index.insert(r.clone(), i).is_some() {
                return Err(Error::Duplicate(alloc::format!("region {r}")));
            }
        }
        Ok(Self {
            regions,
            index,
            adjacency: Csr::from_dense(weights),
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn region(&self, i: usize) -> &RegionId {
        &self.regions[i]
    }

    pub fn index_of(&self, region: &RegionId) -> Option<usize> {
        self.index.get(region).copied()
    }

    /// Raw weights as a sparse matrix.
    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency.get(i, j)
    }

    pub fn to_dense(&self) -> Matrix {
        self.adjacency.to_dense()
    }

    /// Non-zero edges `(origin, destination, weight)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |i| self.adjacency.row(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz()
    }

    pub fn total_weight(&self) -> f64 {
        self.adjacency.row_sums().iter().sum()
    }

    /// Node indices ordered by region id. Equal to `0..N` for networks built
    /// here; kept explicit so samplers can key on region identity.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.node_count()).collect();
        order.sort_by(|&a, &b| self.regions[a].cmp(&self.regions[b]));
        order
    }

    /// `Ã` under `opts`, sparse.
    pub fn transformed(&self, opts: &AdjacencyOptions) -> Csr {
        let n = self.node_count();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in self.edges() {
            let t = opts.transform.apply(w);
            if opts.symmetrize {
                rows[i].push((j, 0.5 * t));
                rows[j].push((i, 0.5 * t));
            } else {
                rows[i].push((j, t));
            }
        }
        if opts.self_loops {
            for (i, row) in rows.iter_mut().enumerate() {
                row.push((i, 1.0));
            }
        }
        Csr::from_rows(n, rows).expect("indices come from the network")
    }

    /// `Ã` under `opts`, dense; computed independently of [`Self::transformed`].
    pub fn transformed_dense(&self, opts: &AdjacencyOptions) -> Matrix {
        let n = self.node_count();
        let t = self.to_dense().map(|w| opts.transform.apply(w));
        let mut out = if opts.symmetrize {
            t.add(&t.transpose()).expect("square").scale(0.5)
        } else {
            t
        };
        if opts.self_loops {
            for i in 0..n {
                out[(i, i)] += 1.0;
            }
        }
        out
    }

    pub fn stats(&self) -> NetworkStats {
        let n = self.node_count();
        let total = self.total_weight();
        let edges = self.edge_count();
        let out_strength = self.adjacency.row_sums();
        let mut in_strength = vec![0.0; n];
        let mut out_degree = vec![0usize; n];
        let mut in_degree = vec![0usize; n];
        for (i, j, w) in self.edges() {
            in_strength[j] += w;
            out_degree[i] += 1;
            in_degree[j] += 1;
        }
        let self_loops = self.edges().filter(|(i, j, _)| i == j).count();
        NetworkStats {
            nodes: n,
            nonzero_edges: edges,
            self_loops,
            total_weight: total,
            avg_weight_all_pairs: total / (n as f64 * n as f64),
            avg_weight_nonzero: if edges == 0 { 0.0 } else { total / edges as f64 },
            out_degree: Summary::of(out_degree.iter().map(|d| *d as f64)),
            in_degree: Summary::of(in_degree.iter().map(|d| *d as f64)),
            out_strength: Summary::of(out_strength.iter().copied()),
            in_strength: Summary::of(in_strength.iter().copied()),
            isolated_nodes: (0..n).filter(|&i| out_degree[i] == 0 && in_degree[i] == 0).count(),
        }
    }
}

/// Min / mean / max of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            count += 1;
        }
        if count == 0 {
            return Self { min: 0.0, mean: 0.0, max: 0.0 };
        }
        Self {
            min,
            mean: sum / count as f64,
            max,
        }
    }
}

/// Size and weight statistics of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStats {
    pub nodes: usize,
    pub nonzero_edges: usize,
    pub self_loops: usize,
    pub total_weight: f64,
    /// Total weight over all `N²` ordered pairs.
    pub avg_weight_all_pairs: f64,
    /// Total weight over the non-zero entries.
    pub avg_weight_nonzero: f64,
    pub out_degree: Summary,
    pub in_degree: Summary,
    pub out_strength: Summary,
    pub in_strength: Summary,
    pub isolated_nodes: usize,
}

/// Row sums of `Ã` under `opts`. With self-loops every degree is ≥ 1.
pub fn degree_vector(net: &MobilityNetwork, opts: &AdjacencyOptions) -> Vec<f64> {
    net.transformed(opts).row_sums()
}

/// `D^{-1/2} Ã D^{-1/2}` with `Ã` the transformed, optionally symmetrized,
/// self-looped adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: Csr,
    symmetrized: bool,
    self_loops_added: bool,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops_added
    }

    pub fn node_count(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn to_dense(&self) -> Matrix {
        self.matrix.to_dense()
    }

    /// Wraps an explicit operator, e.g. the identity for testing a layer in
    /// isolation.
    pub fn from_matrix(matrix: Csr, symmetrized: bool, self_loops_added: bool) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::shape("normalized adjacency", matrix.n_rows(), matrix.n_cols()));
        }
        Ok(Self {
            matrix,
            symmetrized,
            self_loops_added,
        })
    }
}

/// Sparse route to the symmetric normalization.
pub fn normalize_adjacency(
    net: &MobilityNetwork,
    symmetrize: bool,
    transform: WeightTransform,
) -> NormalizedAdjacency {
    let opts = AdjacencyOptions {
        transform,
        symmetrize,
        self_loops: true,
    };
    let a = net.transformed(&opts);
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / math::sqrt(d) } else { 0.0 })
        .collect();
    let rows = (0..a.n_rows())
        .map(|i| a.row(i).map(|(j, w)| (j, inv_sqrt[i] * w * inv_sqrt[j])).collect())
        .collect();
    NormalizedAdjacency {
        matrix: Csr::from_rows(a.n_cols(), rows).expect("same pattern"),
        symmetrized: symmetrize,
        self_loops_added: true,
    }
}

/// Dense route: `D^{-1/2}(T(A)+I)D^{-1/2}` evaluated entry by entry.
pub fn normalize_adjacency_dense(
    net: &MobilityNetwork,
    symmetrize: bool,
    transform: WeightTransform,
) -> Matrix {
    let opts = AdjacencyOptions {
        transform,
        symmetrize,
        self_loops: true,
    };
    let a = net.transformed_dense(&opts);
    let n = a.rows();
    let d: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = a[(i, j)] / (math::sqrt(d[i]) * math::sqrt(d[j]));
        }
    }
    out
}

/// `{j : Ã[i][j] > 0}` in ascending order.
pub fn neighborhood(net: &MobilityNetwork, i: usize, opts: &AdjacencyOptions) -> Result<Vec<usize>> {
    let n = net.node_count();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let mut out: Vec<usize> = Vec::new();
    for (j, w) in net.adjacency().row(i) {
        if opts.transform.apply(w) > 0.0 {
            out.push(j);
        }
    }
    if opts.symmetrize {
        let t = net.adjacency().transpose();
        for (j, w) in t.row(i) {
            if opts.transform.apply(w) > 0.0 {
                out.push(j);
            }
        }
    }
    if opts.self_loops {
        out.push(i);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Edge lists for attention: for each node `i` its neighbors `j ∈ N(i)`,
/// grouped by `i` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    /// Receiving node `i` of each edge.
    targets: Vec<usize>,
    /// Neighbor `j` of each edge.
    sources: Vec<usize>,
}

impl Topology {
    /// Neighborhoods of the symmetrized graph with self-loops.
    pub fn from_network(net: &MobilityNetwork) -> Self {
        let opts = AdjacencyOptions {
            transform: WeightTransform::Binary,
            symmetrize: true,
            self_loops: true,
        };
        Self::from_csr(&net.transformed(&opts))
    }

    /// Edge lists from the non-zero pattern of a square matrix.
    pub fn from_csr(a: &Csr) -> Self {
        let mut targets = Vec::with_capacity(a.nnz());
        let mut sources = Vec::with_capacity(a.nnz());
        for i in 0..a.n_rows() {
            for (j, _) in a.row(i) {
                targets.push(i);
                sources.push(j);
            }
        }
        Self {
            node_count: a.n_rows(),
            targets,
            sources,
        }
    }

    /// Explicit neighbor lists. Every node must have at least one neighbor.
    pub fn from_neighbors(neighbors: &[Vec<usize>]) -> Result<Self> {
        let n = neighbors.len();
        let mut targets = Vec::new();
        let mut sources = Vec::new();
        for (i, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(alloc::format!(
                    "node {i} has an empty neighborhood"
                )));
            }
            for &j in list {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, len: n });
                }
                targets.push(i);
                sources.push(j);
            }
        }
        Ok(Self {
            node_count: n,
            targets,
            sources,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}
