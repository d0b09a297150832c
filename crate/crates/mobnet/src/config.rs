//! Flat `key = value` run configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use mobnet_core::embeddings::RandomWalkVariant;
use mobnet_core::eval::{Init, Method, PipelineConfig, SplitKind};
use mobnet_core::nn::{OptimizerConfig, OptimizerKind};
use mobnet_core::synth::PlantedCitySpec;
use mobnet_core::vnn::{PairFeature, PairSampling};
use mobnet_core::{GeoLevel, WeightTransform};

use crate::io::OdSchema;

/// Keys prefixed with this are run metadata and ignored on load.
pub const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub city: String,
    pub od_path: Option<PathBuf>,
    pub od: OdSchema,
    pub income_path: Option<PathBuf>,
    pub income_region_column: String,
    pub income_column: String,
    pub centroids_path: Option<PathBuf>,
    pub features_path: Option<PathBuf>,
    pub features_region_column: String,
    pub features_proportions: bool,
    pub universe_path: Option<PathBuf>,
    pub method: Method,
    pub init: Init,
    pub d: usize,
    /// `embed`/`cluster` refine the initial embedding with edge reconstruction.
    pub embed_trained: bool,
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub seeds: usize,
    pub output_dir: Option<PathBuf>,
    pub cluster_k: usize,
    pub cluster_restarts: usize,
    pub cluster_max_iter: usize,
    /// `None` runs the network methods, plus the feature benchmark when a
    /// feature file is configured.
    pub grid_methods: Option<Vec<Method>>,
    pub grid_inits: Vec<Init>,
    pub grid_dims: Vec<usize>,
    /// Worker threads; 0 uses every logical core.
    pub grid_jobs: usize,
    pub pipeline: PipelineConfig,
    pub synth: PlantedCitySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            city: "city".into(),
            od_path: None,
            od: OdSchema::default(),
            income_path: None,
            income_region_column: "geoid".into(),
            income_column: "median_income".into(),
            centroids_path: None,
            features_path: None,
            features_region_column: "geoid".into(),
            features_proportions: true,
            universe_path: None,
            method: Method::VnnTwoStep,
            init: Init::Svd,
            d: 5,
            embed_trained: false,
            seed: 0,
            seeds: 1,
            output_dir: None,
            cluster_k: 5,
            cluster_restarts: 10,
            cluster_max_iter: 300,
            grid_methods: None,
            grid_inits: Init::ALL.to_vec(),
            grid_dims: vec![5],
            grid_jobs: 0,
            pipeline: PipelineConfig::default(),
            synth: PlantedCitySpec::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "city",
    "od.path",
    "od.work_column",
    "od.home_column",
    "od.count_column",
    "od.delimiter",
    "od.header",
    "od.geo_level",
    "income.path",
    "income.region_column",
    "income.column",
    "centroids.path",
    "features.path",
    "features.region_column",
    "features.proportions",
    "universe.path",
    "model.method",
    "model.init",
    "model.d",
    "embed.trained",
    "run.seed",
    "run.seeds",
    "eval.split",
    "graph.weight_transform",
    "random_walk.variant",
    "output.dir",
    "cluster.k",
    "cluster.restarts",
    "cluster.max_iter",
    "grid.methods",
    "grid.inits",
    "grid.dims",
    "grid.jobs",
    "vnn.epochs",
    "vnn.batch_size",
    "vnn.sampling",
    "vnn.feature",
    "vnn.patience",
    "vnn.min_rel_improvement",
    "vnn.init_noise",
    "vnn.optimizer",
    "vnn.lr",
    "vnn.weight_decay",
    "gnn.hidden",
    "gnn.heads",
    "gnn.leaky_slope",
    "gnn.head_hidden",
    "gnn.masked_loss",
    "gnn.dropout",
    "gnn.epochs",
    "gnn.optimizer",
    "gnn.lr",
    "gnn.weight_decay",
    "head.hidden",
    "head.epochs",
    "head.batch_size",
    "head.optimizer",
    "head.lr",
    "head.weight_decay",
    "synth.nodes",
    "synth.communities",
    "synth.lambda_in",
    "synth.lambda_out",
    "synth.base_income",
    "synth.income_gap",
    "synth.spatial_gradient",
    "synth.noise_sd",
    "synth.noise_features",
    "synth.center_lon",
    "synth.center_lat",
    "synth.extent",
    "synth.spatial_mixing",
    "synth.county",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn finite(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if !x.is_finite() {
        bail!("{key}: {v:?} is not finite");
    }
    Ok(x)
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {v:?}"),
    }
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| anyhow!("{key}: unknown entry {s:?}")))
        .collect()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

pub fn parse_split(v: &str) -> Result<SplitKind> {
    let (kind, arg) = v.split_once(':').unwrap_or((v, ""));
    match kind {
        "holdout" => {
            let f: f64 = if arg.is_empty() { 0.7 } else { num("eval.split", arg)? };
            if !(f > 0.0 && f < 1.0) {
                bail!("eval.split: train fraction {f} must lie in (0, 1)");
            }
            Ok(SplitKind::Holdout { train_fraction: f })
        }
        "kfold" => {
            let k: usize = if arg.is_empty() { 5 } else { num("eval.split", arg)? };
            if k < 2 {
                bail!("eval.split: k-fold needs k >= 2");
            }
            Ok(SplitKind::KFold { k })
        }
        _ => bail!("eval.split: expected holdout:<fraction> or kfold:<k>, got {v:?}"),
    }
}

fn show_split(s: SplitKind) -> String {
    match s {
        SplitKind::Holdout { train_fraction } => format!("holdout:{train_fraction}"),
        SplitKind::KFold { k } => format!("kfold:{k}"),
    }
}

fn parse_delimiter(v: &str) -> Result<u8> {
    match v {
        "tab" | "\\t" => Ok(b'\t'),
        "comma" => Ok(b','),
        _ if v.len() == 1 && v.is_ascii() && !v.as_bytes()[0].is_ascii_whitespace() => Ok(v.as_bytes()[0]),
        _ => bail!("od.delimiter: expected one character or `tab`, got {v:?}"),
    }
}

fn show_delimiter(d: u8) -> String {
    if d == b'\t' {
        "tab".into()
    } else {
        (d as char).to_string()
    }
}

fn parse_optimizer(key: &str, v: &str) -> Result<OptimizerKind> {
    match v {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => bail!("{key}: expected adam or sgd, got {v:?}"),
    }
}

fn show_optimizer(o: &OptimizerConfig) -> &'static str {
    match o.kind {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Sgd => "sgd",
    }
}

fn widths(key: &str, v: &str) -> Result<Vec<usize>> {
    let out = list(key, v, |s| s.parse::<usize>().ok().filter(|&n| n > 0))?;
    Ok(out)
}

impl RunConfig {
    /// The value of `key` as written in a config file.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = &self.pipeline;
        let s = &self.synth;
        Some(match key {
            "city" => self.city.clone(),
            "od.path" => show_path(&self.od_path),
            "od.work_column" => self.od.work_column.clone(),
            "od.home_column" => self.od.home_column.clone(),
            "od.count_column" => self.od.count_column.clone(),
            "od.delimiter" => show_delimiter(self.od.delimiter),
            "od.header" => self.od.has_header.to_string(),
            "od.geo_level" => match self.od.geo_level {
                GeoLevel::Block => "block".into(),
                GeoLevel::Tract => "tract".into(),
            },
            "income.path" => show_path(&self.income_path),
            "income.region_column" => self.income_region_column.clone(),
            "income.column" => self.income_column.clone(),
            "centroids.path" => show_path(&self.centroids_path),
            "features.path" => show_path(&self.features_path),
            "features.region_column" => self.features_region_column.clone(),
            "features.proportions" => self.features_proportions.to_string(),
            "universe.path" => show_path(&self.universe_path),
            "model.method" => self.method.name().into(),
            "model.init" => self.init.name().into(),
            "model.d" => self.d.to_string(),
            "embed.trained" => self.embed_trained.to_string(),
            "run.seed" => self.seed.to_string(),
            "run.seeds" => self.seeds.to_string(),
            "eval.split" => show_split(p.split),
            "graph.weight_transform" => p.transform.name().into(),
            "random_walk.variant" => match p.random_walk {
                RandomWalkVariant::PagerankMultiDamping => "pagerank".into(),
                RandomWalkVariant::KStepLanding => "landing".into(),
            },
            "output.dir" => show_path(&self.output_dir),
            "cluster.k" => self.cluster_k.to_string(),
            "cluster.restarts" => self.cluster_restarts.to_string(),
            "cluster.max_iter" => self.cluster_max_iter.to_string(),
            "grid.methods" => match &self.grid_methods {
                None => "auto".into(),
                Some(m) => join(m, |m| m.name().to_string()),
            },
            "grid.inits" => join(&self.grid_inits, |i| i.name().to_string()),
            "grid.dims" => join(&self.grid_dims, usize::to_string),
            "grid.jobs" => self.grid_jobs.to_string(),
            "vnn.epochs" => p.vnn.epochs.to_string(),
            "vnn.batch_size" => p.vnn.batch_size.to_string(),
            "vnn.sampling" => match p.vnn.sampling {
                None => "auto".into(),
                Some(PairSampling::AllPairs) => "all_pairs".into(),
                Some(PairSampling::Balanced) => "balanced".into(),
            },
            "vnn.feature" => match p.vnn.feature {
                PairFeature::SquaredDiff => "squared_diff".into(),
                PairFeature::Concat => "concat".into(),
            },
            "vnn.patience" => p.vnn.patience.to_string(),
            "vnn.min_rel_improvement" => p.vnn.min_rel_improvement.to_string(),
            "vnn.init_noise" => p.vnn.init_noise.to_string(),
            "vnn.optimizer" => show_optimizer(&p.vnn.optimizer).into(),
            "vnn.lr" => p.vnn.optimizer.lr.to_string(),
            "vnn.weight_decay" => p.vnn.optimizer.weight_decay.to_string(),
            "gnn.hidden" => format!("{},{}", p.gnn.hidden.0, p.gnn.hidden.1),
            "gnn.heads" => p.gnn.heads.to_string(),
            "gnn.leaky_slope" => p.gnn.leaky_slope.to_string(),
            "gnn.head_hidden" => join(&p.gnn.head_hidden, usize::to_string),
            "gnn.masked_loss" => p.gnn.masked_loss.to_string(),
            "gnn.dropout" => p.gnn.dropout.to_string(),
            "gnn.epochs" => p.gnn.epochs.to_string(),
            "gnn.optimizer" => show_optimizer(&p.gnn.optimizer).into(),
            "gnn.lr" => p.gnn.optimizer.lr.to_string(),
            "gnn.weight_decay" => p.gnn.optimizer.weight_decay.to_string(),
            "head.hidden" => join(&p.head.hidden, usize::to_string),
            "head.epochs" => p.head.epochs.to_string(),
            "head.batch_size" => p.head.batch_size.to_string(),
            "head.optimizer" => show_optimizer(&p.head.optimizer).into(),
            "head.lr" => p.head.optimizer.lr.to_string(),
            "head.weight_decay" => p.head.optimizer.weight_decay.to_string(),
            "synth.nodes" => s.nodes.to_string(),
            "synth.communities" => s.communities.to_string(),
            "synth.lambda_in" => s.lambda_in.to_string(),
            "synth.lambda_out" => s.lambda_out.to_string(),
            "synth.base_income" => s.base_income.to_string(),
            "synth.income_gap" => s.income_gap.to_string(),
            "synth.spatial_gradient" => s.spatial_gradient.to_string(),
            "synth.noise_sd" => s.noise_sd.to_string(),
            "synth.noise_features" => s.noise_features.to_string(),
            "synth.center_lon" => s.center.0.to_string(),
            "synth.center_lat" => s.center.1.to_string(),
            "synth.extent" => s.extent.to_string(),
            "synth.spatial_mixing" => s.spatial_mixing.to_string(),
            "synth.county" => s.county.clone(),
            _ => return None,
        })
    }

    /// Sets `key` from its textual value. Unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        let p = &mut self.pipeline;
        let s = &mut self.synth;
        match key {
            "city" => self.city = v.to_string(),
            "od.path" => self.od_path = path(v),
            "od.work_column" => self.od.work_column = v.to_string(),
            "od.home_column" => self.od.home_column = v.to_string(),
            "od.count_column" => self.od.count_column = v.to_string(),
            "od.delimiter" => self.od.delimiter = parse_delimiter(v)?,
            "od.header" => self.od.has_header = flag(key, v)?,
            "od.geo_level" => {
                self.od.geo_level = match v {
                    "block" => GeoLevel::Block,
                    "tract" => GeoLevel::Tract,
                    _ => bail!("od.geo_level: expected block or tract, got {v:?}"),
                }
            }
            "income.path" => self.income_path = path(v),
            "income.region_column" => self.income_region_column = v.to_string(),
            "income.column" => self.income_column = v.to_string(),
            "centroids.path" => self.centroids_path = path(v),
            "features.path" => self.features_path = path(v),
            "features.region_column" => self.features_region_column = v.to_string(),
            "features.proportions" => self.features_proportions = flag(key, v)?,
            "universe.path" => self.universe_path = path(v),
            "model.method" => {
                self.method = Method::from_name(v).ok_or_else(|| anyhow!("model.method: unknown method {v:?}"))?
            }
            "model.init" => self.init = Init::from_name(v).ok_or_else(|| anyhow!("model.init: unknown init {v:?}"))?,
            "model.d" => self.d = num(key, v)?,
            "embed.trained" => self.embed_trained = flag(key, v)?,
            "run.seed" => self.seed = num(key, v)?,
            "run.seeds" => self.seeds = num(key, v)?,
            "eval.split" => p.split = parse_split(v)?,
            "graph.weight_transform" => {
                p.transform = WeightTransform::from_name(v)
                    .ok_or_else(|| anyhow!("graph.weight_transform: expected raw, log1p or binary, got {v:?}"))?
            }
            "random_walk.variant" => {
                p.random_walk = match v {
                    "pagerank" => RandomWalkVariant::PagerankMultiDamping,
                    "landing" => RandomWalkVariant::KStepLanding,
                    _ => bail!("random_walk.variant: expected pagerank or landing, got {v:?}"),
                }
            }
            "output.dir" => self.output_dir = path(v),
            "cluster.k" => self.cluster_k = num(key, v)?,
            "cluster.restarts" => self.cluster_restarts = num(key, v)?,
            "cluster.max_iter" => self.cluster_max_iter = num(key, v)?,
            "grid.methods" => {
                self.grid_methods = if v == "auto" { None } else { Some(list(key, v, Method::from_name)?) }
            }
            "grid.inits" => self.grid_inits = list(key, v, Init::from_name)?,
            "grid.dims" => self.grid_dims = widths(key, v)?,
            "grid.jobs" => self.grid_jobs = num(key, v)?,
            "vnn.epochs" => p.vnn.epochs = num(key, v)?,
            "vnn.batch_size" => p.vnn.batch_size = num(key, v)?,
            "vnn.sampling" => {
                p.vnn.sampling = match v {
                    "auto" => None,
                    "all_pairs" => Some(PairSampling::AllPairs),
                    "balanced" => Some(PairSampling::Balanced),
                    _ => bail!("vnn.sampling: expected auto, all_pairs or balanced, got {v:?}"),
                }
            }
            "vnn.feature" => {
                p.vnn.feature = match v {
                    "squared_diff" => PairFeature::SquaredDiff,
                    "concat" => PairFeature::Concat,
                    _ => bail!("vnn.feature: expected squared_diff or concat, got {v:?}"),
                }
            }
            "vnn.patience" => p.vnn.patience = num(key, v)?,
            "vnn.min_rel_improvement" => p.vnn.min_rel_improvement = finite(key, v)?,
            "vnn.init_noise" => p.vnn.init_noise = finite(key, v)?,
            "vnn.optimizer" => p.vnn.optimizer.kind = parse_optimizer(key, v)?,
            "vnn.lr" => p.vnn.optimizer.lr = finite(key, v)?,
            "vnn.weight_decay" => p.vnn.optimizer.weight_decay = finite(key, v)?,
            "gnn.hidden" => match widths(key, v)?[..] {
                [a, b] => p.gnn.hidden = (a, b),
                _ => bail!("gnn.hidden: expected two widths, got {v:?}"),
            },
            "gnn.heads" => p.gnn.heads = num(key, v)?,
            "gnn.leaky_slope" => p.gnn.leaky_slope = finite(key, v)?,
            "gnn.head_hidden" => p.gnn.head_hidden = widths(key, v)?,
            "gnn.masked_loss" => p.gnn.masked_loss = flag(key, v)?,
            "gnn.dropout" => p.gnn.dropout = finite(key, v)?,
            "gnn.epochs" => p.gnn.epochs = num(key, v)?,
            "gnn.optimizer" => p.gnn.optimizer.kind = parse_optimizer(key, v)?,
            "gnn.lr" => p.gnn.optimizer.lr = finite(key, v)?,
            "gnn.weight_decay" => p.gnn.optimizer.weight_decay = finite(key, v)?,
            "head.hidden" => p.head.hidden = widths(key, v)?,
            "head.epochs" => p.head.epochs = num(key, v)?,
            "head.batch_size" => p.head.batch_size = num(key, v)?,
            "head.optimizer" => p.head.optimizer.kind = parse_optimizer(key, v)?,
            "head.lr" => p.head.optimizer.lr = finite(key, v)?,
            "head.weight_decay" => p.head.optimizer.weight_decay = finite(key, v)?,
            "synth.nodes" => s.nodes = num(key, v)?,
            "synth.communities" => s.communities = num(key, v)?,
            "synth.lambda_in" => s.lambda_in = finite(key, v)?,
            "synth.lambda_out" => s.lambda_out = finite(key, v)?,
            "synth.base_income" => s.base_income = finite(key, v)?,
            "synth.income_gap" => s.income_gap = finite(key, v)?,
            "synth.spatial_gradient" => s.spatial_gradient = finite(key, v)?,
            "synth.noise_sd" => s.noise_sd = finite(key, v)?,
            "synth.noise_features" => s.noise_features = num(key, v)?,
            "synth.center_lon" => s.center.0 = finite(key, v)?,
            "synth.center_lat" => s.center.1 = finite(key, v)?,
            "synth.extent" => s.extent = finite(key, v)?,
            "synth.spatial_mixing" => s.spatial_mixing = finite(key, v)?,
            "synth.county" => s.county = v.to_string(),
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Every key in a fixed order, one `key = value` per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let v = self.get(key).expect("listed key");
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Parses config text over the defaults. `#` starts a comment line;
    /// `manifest.*` keys are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", n + 1))?;
            let k = k.trim();
            if k.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            if !seen.insert(k.to_string()) {
                bail!("config line {}: key {k:?} given twice", n + 1);
            }
            cfg.set(k, v).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 6] {
        [
            &mut self.od_path,
            &mut self.income_path,
            &mut self.centroids_path,
            &mut self.features_path,
            &mut self.universe_path,
            &mut self.output_dir,
        ]
    }

    /// Seeds of the run: `run.seeds` consecutive values from `run.seed`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("mobnet-out"))
    }

    /// Checks that every configured input exists, value ranges, and that the
    /// output directory can be created and written.
    pub fn validate(&self) -> Result<()> {
        let inputs = [
            ("od.path", &self.od_path),
            ("income.path", &self.income_path),
            ("centroids.path", &self.centroids_path),
            ("features.path", &self.features_path),
            ("universe.path", &self.universe_path),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("{key}: {} does not exist", p.display());
                }
            }
        }
        if self.d == 0 || self.grid_dims.is_empty() {
            bail!("embedding width must be positive");
        }
        if self.seeds == 0 {
            bail!("run.seeds must be at least 1");
        }
        if self.cluster_k == 0 || self.cluster_restarts == 0 {
            bail!("cluster.k and cluster.restarts must be positive");
        }
        if !(0.0..1.0).contains(&self.pipeline.gnn.dropout) {
            bail!("gnn.dropout must lie in [0, 1)");
        }
        let dir = self.output_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        tempfile::NamedTempFile::new_in(&dir)
            .with_context(|| format!("output directory {} is not writable", dir.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_renders_every_key() {
        let cfg = RunConfig::default();
        let text = cfg.render();
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_and_repeated_keys_fail() {
        assert!(RunConfig::parse("model.dd = 3").unwrap_err().to_string().contains("line 1"));
        assert!(RunConfig::parse("model.d = 3\nmodel.d = 4").is_err());
        let cfg = RunConfig::parse("# comment\nmanifest.command = embed\nmodel.d = 3\n").unwrap();
        assert_eq!(cfg.d, 3);
    }

    #[test]
    fn split_syntax() {
        assert_eq!(parse_split("kfold:5").unwrap(), SplitKind::KFold { k: 5 });
        assert_eq!(parse_split("holdout:0.7").unwrap(), SplitKind::Holdout { train_fraction: 0.7 });
        assert!(parse_split("holdout:1.5").is_err());
        assert!(parse_split("bootstrap").is_err());
    }
}
