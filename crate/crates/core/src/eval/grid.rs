use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{make_split, SeedSummary, SplitKind};
use crate::embeddings::{
    laplacian_embedding, random_walk_embedding, spatial_embedding, svd_embedding, ColumnStats, EmbeddingMatrix,
    RandomWalkVariant,
};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::gnn::{train_end_to_end, GnnConfig, GraphInputs, LayerKind};
use crate::graph::{MobilityNetwork, WeightTransform};
use crate::linalg::Matrix;
use crate::nn::ModelParams;
use crate::region::{AttributeTable, RegionId};
use crate::vnn::{fit_head, train_vnn_embedding, HeadConfig, VnnConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    VnnTwoStep,
    GcnVnn,
    GatVnn,
    FeatureMlp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::VnnTwoStep, Method::GcnVnn, Method::GatVnn, Method::FeatureMlp];

    pub fn name(self) -> &'static str {
        match self {
            Method::VnnTwoStep => "vnn_two_step",
            Method::GcnVnn => "gcn_vnn",
            Method::GatVnn => "gat_vnn",
            Method::FeatureMlp => "feature_mlp",
        }
    }

    /// Accepts the grid names and the short CLI names.
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "vnn_two_step" | "vnn" => Method::VnnTwoStep,
            "gcn_vnn" | "gcn" => Method::GcnVnn,
            "gat_vnn" | "gat" => Method::GatVnn,
            "feature_mlp" | "features" => Method::FeatureMlp,
            _ => return None,
        })
    }

    pub fn uses_init(self) -> bool {
        self != Method::FeatureMlp
    }
}

/// Starting embedding of the network-based methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Init {
    Spatial,
    Svd,
    Laplacian,
    RandomWalk,
}

impl Init {
    pub const ALL: [Init; 4] = [Init::Spatial, Init::Svd, Init::Laplacian, Init::RandomWalk];

    pub fn name(self) -> &'static str {
        match self {
            Init::Spatial => "spatial",
            Init::Svd => "svd",
            Init::Laplacian => "laplacian",
            Init::RandomWalk => "randomwalk",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "spatial" => Init::Spatial,
            "svd" => Init::Svd,
            "laplacian" | "le" => Init::Laplacian,
            "randomwalk" | "random_walk" => Init::RandomWalk,
            _ => return None,
        })
    }
}

/// Inputs of one city, aligned to the network's node order.
#[derive(Debug, Clone)]
pub struct CityData {
    pub name: String,
    pub network: MobilityNetwork,
    pub targets: Vec<Option<f64>>,
    pub centroids: Option<BTreeMap<RegionId, (f64, f64)>>,
    /// Extra per-region attributes for the feature benchmark.
    pub features: Option<AttributeTable>,
}

impl CityData {
    /// Aligns `income` column `column` to the network.
    pub fn new(name: impl Into<String>, network: MobilityNetwork, income: &AttributeTable, column: usize) -> Self {
        let targets = income.aligned_column(&network, column);
        Self {
            name: name.into(),
            network,
            targets,
            centroids: None,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub transform: WeightTransform,
    pub split: SplitKind,
    pub random_walk: RandomWalkVariant,
    pub vnn: VnnConfig,
    pub gnn: GnnConfig,
    pub head: HeadConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            transform: WeightTransform::Log1p,
            split: SplitKind::default(),
            random_walk: RandomWalkVariant::default(),
            vnn: VnnConfig::default(),
            gnn: GnnConfig::default(),
            head: HeadConfig::default(),
        }
    }
}

/// One `(method, init, d)` combination; `init` is `None` for the feature benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCell {
    pub method: Method,
    pub init: Option<Init>,
    pub d: usize,
}

impl GridCell {
    /// Every network method × init × d, then one feature cell per d when
    /// `FeatureMlp` is requested.
    pub fn grid(methods: &[Method], inits: &[Init], dims: &[usize]) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &method in methods {
            for &d in dims {
                if method.uses_init() {
                    for &init in inits {
                        out.push(GridCell { method, init: Some(init), d });
                    }
                } else {
                    out.push(GridCell { method, init: None, d });
                }
            }
        }
        out
    }
}

/// Initial embedding for `init`; the spatial embedding is always 2 wide.
pub fn initial_embedding(city: &CityData, init: Init, d: usize, config: &PipelineConfig) -> Result<EmbeddingMatrix> {
    let net = &city.network;
    let t = config.transform;
    Ok(match init {
        Init::Spatial => {
            let c = city.centroids.as_ref().ok_or_else(|| Error::Missing("centroid file".into()))?;
            spatial_embedding(net, c)?
        }
        Init::Svd => svd_embedding(net, d, t)?,
        Init::Laplacian => laplacian_embedding(net, d, t)?,
        Init::RandomWalk => random_walk_embedding(net, d, config.random_walk, t)?,
    }
    .standardized())
}

/// A column-standardized block plus which rows carry values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub values: Matrix,
    pub present: Vec<bool>,
}

/// Standardizes every column of `table` over the network nodes that have a
/// complete row; incomplete rows are zero-filled and flagged absent.
fn attribute_block(net: &MobilityNetwork, table: &AttributeTable) -> Result<FeatureBlock> {
    let cols: Vec<usize> = (0..table.columns().len()).collect();
    if cols.is_empty() {
        return Err(Error::Missing("feature columns".into()));
    }
    let rows = table.aligned_rows(net, &cols);
    let present: Vec<bool> = rows.iter().map(Option::is_some).collect();
    let full: Vec<&Vec<f64>> = rows.iter().flatten().collect();
    if full.is_empty() {
        return Err(Error::Missing("no node has a complete feature row".into()));
    }
    let stats = ColumnStats::of(&Matrix::from_rows(&full)?);
    let mut values = Matrix::zeros(net.node_count(), cols.len());
    for (i, r) in rows.iter().enumerate() {
        if let Some(r) = r {
            let std = stats.apply(&Matrix::from_rows(&[r])?);
            values.row_mut(i).copy_from_slice(std.row(0));
        }
    }
    Ok(FeatureBlock { values, present })
}

/// `[standardized embedding ‖ standardized attributes]`. The attribute
/// table must cover exactly the network's regions.
pub fn concat_features(emb: &EmbeddingMatrix, net: &MobilityNetwork, table: &AttributeTable) -> Result<FeatureBlock> {
    if emb.rows() != net.node_count() {
        return Err(Error::shape("embedding rows", net.node_count(), emb.rows()));
    }
    let ours: BTreeSet<&RegionId> = net.regions().iter().collect();
    let theirs: BTreeSet<&RegionId> = table.regions().collect();
    let diff: Vec<String> = ours.symmetric_difference(&theirs).map(|r| r.to_string()).collect();
    if !diff.is_empty() {
        return Err(Error::invalid(format!(
            "embedding and attribute regions differ in {} region(s): {}",
            diff.len(),
            diff.join(", ")
        )));
    }
    let block = attribute_block(net, table)?;
    Ok(FeatureBlock {
        values: emb.standardized().values().hstack(&block.values)?,
        present: block.present,
    })
}

/// Result of one seed of one cell: R² averaged over the split's folds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub r2: f64,
    pub reports: Vec<EvalReport>,
    /// Trained weights per fold, names prefixed by component.
    pub checkpoints: Vec<ModelParams>,
}

/// Trains and evaluates `cell` with every stochastic component seeded by `seed`.
pub fn run_seed(city: &CityData, cell: &GridCell, config: &PipelineConfig, seed: u64) -> Result<SeedRun> {
    let net = &city.network;
    if city.targets.len() != net.node_count() {
        return Err(Error::shape("targets", net.node_count(), city.targets.len()));
    }
    let head = HeadConfig { seed, ..config.head.clone() };
    let mut reports = Vec::new();
    let mut checkpoints = Vec::new();
    match cell.method {
        Method::FeatureMlp => {
            let table = city.features.as_ref().ok_or_else(|| Error::Missing("feature table".into()))?;
            let block = attribute_block(net, table)?;
            let eligible: Vec<bool> = city.targets.iter().zip(&block.present).map(|(t, p)| t.is_some() && *p).collect();
            let split = make_split(&eligible, config.split, seed)?;
            for fold in 0..split.fold_count() {
                let fit = fit_head(&block.values, &city.targets, &split.partition(fold)?, &head)?;
                let mut ckpt = ModelParams::new();
                ckpt.absorb("head.", &fit.params)?;
                checkpoints.push(ckpt);
                reports.push(fit.report);
            }
        }
        method => {
            let init = cell.init.ok_or_else(|| Error::invalid(format!("{} needs an init", method.name())))?;
            let e0 = initial_embedding(city, init, cell.d, config)?;
            let eligible: Vec<bool> = city.targets.iter().map(Option::is_some).collect();
            let split = make_split(&eligible, config.split, seed)?;
            if method == Method::VnnTwoStep {
                let vnn = VnnConfig {
                    d: cell.d,
                    seed,
                    transform: config.transform,
                    ..config.vnn.clone()
                };
                let model = train_vnn_embedding(net, Some(&e0), &vnn)?;
                let learned = model.embedding().standardized();
                for fold in 0..split.fold_count() {
                    let fit = fit_head(learned.values(), &city.targets, &split.partition(fold)?, &head)?;
                    let mut ckpt = ModelParams::new();
                    ckpt.absorb("vnn.", model.params())?;
                    ckpt.absorb("head.", &fit.params)?;
                    checkpoints.push(ckpt);
                    reports.push(fit.report);
                }
            } else {
                let layer_kind = if method == Method::GcnVnn { LayerKind::Gcn } else { LayerKind::Gat };
                let gnn = GnnConfig {
                    layer_kind,
                    seed,
                    transform: config.transform,
                    ..config.gnn.clone()
                };
                let inputs = GraphInputs::new(net, config.transform);
                for fold in 0..split.fold_count() {
                    let part = split.partition(fold)?;
                    let run = train_end_to_end(&inputs, &e0, &city.targets, &part, &gnn)?;
                    let mut ckpt = ModelParams::new();
                    ckpt.absorb("gnn.", run.model.params())?;
                    checkpoints.push(ckpt);
                    reports.push(run.report);
                }
            }
        }
    }
    let r2 = reports.iter().map(|r| r.r2).sum::<f64>() / reports.len() as f64;
    Ok(SeedRun { seed, r2, reports, checkpoints })
}

/// Final state of a grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done(SeedSummary),
    /// Required inputs are absent (e.g. no centroid or feature file).
    NotAvailable(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: GridCell,
    pub outcome: CellOutcome,
    pub runs: Vec<SeedRun>,
}

impl CellResult {
    pub fn summary(&self) -> Option<&SeedSummary> {
        match &self.outcome {
            CellOutcome::Done(s) => Some(s),
            _ => None,
        }
    }
}

/// Runs `cell` for every seed. Missing inputs mark the cell NA; any other
/// error marks it failed.
pub fn run_cell(city: &CityData, cell: &GridCell, config: &PipelineConfig, seeds: &[u64]) -> CellResult {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        match run_seed(city, cell, config, seed) {
            Ok(run) => runs.push(run),
            Err(Error::Missing(m)) => {
                return CellResult { cell: *cell, outcome: CellOutcome::NotAvailable(m), runs: Vec::new() }
            }
            Err(e) => {
                return CellResult {
                    cell: *cell,
                    outcome: CellOutcome::Failed(format!("seed {seed}: {e}")),
                    runs,
                }
            }
        }
    }
    let outcome = match SeedSummary::new(seeds.to_vec(), runs.iter().map(|r| r.r2).collect()) {
        Ok(s) => CellOutcome::Done(s),
        Err(e) => CellOutcome::Failed(e.to_string()),
    };
    CellResult { cell: *cell, outcome, runs }
}
