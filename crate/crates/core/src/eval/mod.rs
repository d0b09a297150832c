//! Splits, out-of-sample R², seed statistics and the experiment grid.

mod grid;

pub use grid::{
    concat_features, initial_embedding, run_cell, run_seed, CellOutcome, CellResult, CityData, FeatureBlock,
    GridCell, Init, Method, PipelineConfig, SeedRun,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::seeded_rng;

/// Coefficient of determination `1 − Σ(y−ŷ)² / Σ(y−ȳ)²` with `ȳ` the mean
/// of `y`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::shape("r_squared inputs", y.len(), y_hat.len()));
    }
    if y.len() < 2 {
        return Err(Error::invalid(format!(
            "r_squared needs at least 2 values, got {}",
            y.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("r_squared undefined for a constant ground truth"));
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    Holdout { train_fraction: f64 },
    KFold { k: usize },
}

impl Default for SplitKind {
    fn default() -> Self {
        SplitKind::Holdout { train_fraction: 0.7 }
    }
}

pub const MIN_SPLIT_NODES: usize = 10;

/// Train/test partition of the nodes that carry a target.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    kind: SplitKind,
    seed: u64,
    /// Holdout: 0 = train, 1 = test. K-fold: fold id. `None` = no target.
    assignment: Vec<Option<usize>>,
}

/// Node indices on each side of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random split of the nodes flagged in `eligible`, deterministic per seed.
pub fn make_split(eligible: &[bool], kind: SplitKind, seed: u64) -> Result<SplitPlan> {
    let mut nodes: Vec<usize> = (0..eligible.len()).filter(|&i| eligible[i]).collect();
    let m = nodes.len();
    if m < MIN_SPLIT_NODES {
        return Err(Error::invalid(format!(
            "split needs at least {MIN_SPLIT_NODES} nodes with targets, got {m}"
        )));
    }
    let mut rng = seeded_rng(seed);
    nodes.shuffle(&mut rng);
    let mut assignment = vec![None; eligible.len()];
    match kind {
        SplitKind::Holdout { train_fraction } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::invalid(format!(
                    "train fraction {train_fraction} outside (0, 1)"
                )));
            }
            let n_train = (math::round(train_fraction * m as f64) as usize).clamp(1, m - 1);
            for (p, &i) in nodes.iter().enumerate() {
                assignment[i] = Some(usize::from(p >= n_train));
            }
        }
        SplitKind::KFold { k } => {
            if k < 2 || k > m {
                return Err(Error::invalid(format!("k-fold k={k} must lie in 2..={m}")));
            }
            for (p, &i) in nodes.iter().enumerate() {
                assignment[i] = Some(p * k / m);
            }
        }
    }
    Ok(SplitPlan {
        kind,
        seed,
        assignment,
    })
}

impl SplitPlan {
    pub fn kind(&self) -> SplitKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// Number of train/test partitions: 1 for holdout, `k` for k-fold.
    pub fn fold_count(&self) -> usize {
        match self.kind {
            SplitKind::Holdout { .. } => 1,
            SplitKind::KFold { k } => k,
        }
    }

    /// Partition `fold`; for k-fold the fold is the test side.
    pub fn partition(&self, fold: usize) -> Result<Partition> {
        if fold >= self.fold_count() {
            return Err(Error::IndexOutOfRange {
                index: fold,
                len: self.fold_count(),
            });
        }
        let test_label = match self.kind {
            SplitKind::Holdout { .. } => 1,
            SplitKind::KFold { .. } => fold,
        };
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, a) in self.assignment.iter().enumerate() {
            match a {
                Some(l) if *l == test_label => test.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        Ok(Partition { train, test })
    }
}

/// Out-of-sample predictions for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub test_nodes: Vec<usize>,
    /// Ground truth on the original scale.
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub r2: f64,
    pub fingerprint: u64,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(
        test_nodes: Vec<usize>,
        y: Vec<f64>,
        y_hat: Vec<f64>,
        fingerprint: u64,
        seed: u64,
    ) -> Result<Self> {
        if y_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictions".into()));
        }
        // A constant test target leaves R² undefined; it is reported as 0.
        let r2 = if y.len() >= 2 && y.iter().all(|v| *v == y[0]) {
            0.0
        } else {
            r_squared(&y, &y_hat)?
        };
        Ok(Self {
            test_nodes,
            y,
            y_hat,
            r2,
            fingerprint,
            seed,
        })
    }
}

/// R² across seeds: arithmetic mean and sample standard deviation as the
/// half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    pub r2: Vec<f64>,
    pub mean: f64,
    pub half_width: f64,
}

impl SeedSummary {
    pub fn new(seeds: Vec<u64>, r2: Vec<f64>) -> Result<Self> {
        if seeds.len() != r2.len() || r2.is_empty() {
            return Err(Error::shape("seed summary", seeds.len(), r2.len()));
        }
        let n = r2.len() as f64;
        let mean = r2.iter().sum::<f64>() / n;
        let half_width = if r2.len() < 2 {
            0.0
        } else {
            math::sqrt(r2.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        };
        Ok(Self {
            seeds,
            r2,
            mean,
            half_width,
        })
    }

    pub fn median(&self) -> f64 {
        median(&self.r2)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// 64-bit FNV-1a of a configuration's `Debug` rendering.
pub fn fingerprint<T: Debug + ?Sized>(config: &T) -> u64 {
    struct Fnv(u64);
    impl core::fmt::Write for Fnv {
        fn write_str(&mut self, s: &str) -> core::fmt::Result {
            for b in s.bytes() {
                self.0 ^= u64::from(b);
                self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
            }
            Ok(())
        }
    }
    let mut h = Fnv(0xcbf2_9ce4_8422_2325);
    core::fmt::write(&mut h, format_args!("{config:?}")).expect("hash writer never fails");
    h.0
}

/// Mean/std of the training targets; predictions are mapped back with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaler {
    /// Fits on `values`; a zero spread falls back to unit scale.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = math::sqrt(var);
        Self {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_contract() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(r_squared(&[4.0, 4.0], &[1.0, 2.0]).is_err());
        assert!(r_squared(&[4.0], &[4.0]).is_err());
        assert!(r_squared(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn holdout_sizes() {
        let s = make_split(&[true; 10], SplitKind::Holdout { train_fraction: 0.7 }, 1).unwrap();
        let p = s.partition(0).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (7, 3));
        assert!(make_split(&[true; 9], SplitKind::default(), 1).is_err());
    }

    #[test]
    fn split_skips_nodes_without_targets() {
        let mut eligible = [true; 14];
        eligible[3] = false;
        eligible[9] = false;
        let s = make_split(&eligible, SplitKind::default(), 5).unwrap();
        let p = s.partition(0).unwrap();
        assert_eq!(p.train.len() + p.test.len(), 12);
        assert!(!p.train.contains(&3) && !p.test.contains(&9));
    }

    #[test]
    fn kfold_equal_folds() {
        let s = make_split(&[true; 100], SplitKind::KFold { k: 5 }, 3).unwrap();
        for f in 0..5 {
            let p = s.partition(f).unwrap();
            assert_eq!(p.test.len(), 20);
            assert_eq!(p.train.len(), 80);
        }
        assert!(s.partition(5).is_err());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let a = make_split(&[true; 30], SplitKind::default(), 42).unwrap();
        let b = make_split(&[true; 30], SplitKind::default(), 42).unwrap();
        let c = make_split(&[true; 30], SplitKind::default(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn seed_summary_stats() {
        let s = SeedSummary::new(vec![0, 1, 2], vec![0.5, 0.6, 0.7]).unwrap();
        assert!((s.mean - 0.6).abs() < 1e-15);
        assert!((s.half_width - 0.1).abs() < 1e-12);
        assert_eq!(SeedSummary::new(vec![0], vec![0.3]).unwrap().half_width, 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn fingerprint_distinguishes_configs() {
        assert_eq!(fingerprint(&(1, "a")), fingerprint(&(1, "a")));
        assert_ne!(fingerprint(&(1, "a")), fingerprint(&(2, "a")));
    }
}
