//! Two-step pipeline: learn node embeddings by reconstructing the flow
//! matrix from pairwise embedding features, then regress the target from
//! the learned embedding with a supervised MLP.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embeddings::{EmbeddingMatrix, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::eval::{fingerprint, EvalReport, Partition, SplitPlan, TargetScaler};
use crate::graph::{AdjacencyOptions, MobilityNetwork, WeightTransform};
use crate::linalg::Matrix;
use crate::nn::{seeded_rng, Activation, Mlp, ModelParams, Optimizer, OptimizerConfig, ParamId, Tape};

/// Half-width of a zero-mean uniform with unit variance (√3).
const UNIT_UNIFORM: f64 = 1.732_050_807_568_877_2;

/// Networks up to this size enumerate all pairs by default.
pub const ALL_PAIRS_MAX_NODES: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSampling {
    /// Every ordered pair, self-pairs included, once per epoch.
    AllPairs,
    /// Every non-zero pair plus as many uniformly drawn zero pairs.
    Balanced,
}

/// How a pair of embedding rows becomes the reconstruction MLP input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairFeature {
    /// `(e_i − e_j)²`; symmetric, so the target is the symmetrized matrix.
    SquaredDiff,
    /// `[e_i ‖ e_j]`; directed, reconstructs the unsymmetrized matrix.
    Concat,
}

impl PairFeature {
    pub fn input_width(self, d: usize) -> usize {
        match self {
            PairFeature::SquaredDiff => d,
            PairFeature::Concat => 2 * d,
        }
    }
}

/// One minibatch of node pairs and their reconstruction targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseBatch {
    pub origins: Vec<usize>,
    pub destinations: Vec<usize>,
    pub targets: Vec<f64>,
}

impl PairwiseBatch {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Feature rows for the batch under `feature`.
    pub fn features(&self, e: &Matrix, feature: PairFeature) -> Matrix {
        pair_features(e, &self.origins, &self.destinations, feature)
    }

    fn target_column(&self) -> Matrix {
        Matrix::column_vector(self.targets.clone())
    }
}

/// Feature rows for pairs `(origins[k], destinations[k])`.
pub fn pair_features(e: &Matrix, origins: &[usize], destinations: &[usize], feature: PairFeature) -> Matrix {
    let d = e.cols();
    let mut out = Matrix::zeros(origins.len(), feature.input_width(d));
    for (k, (&i, &j)) in origins.iter().zip(destinations).enumerate() {
        let (a, b) = (e.row(i), e.row(j));
        let row = out.row_mut(k);
        match feature {
            PairFeature::SquaredDiff => {
                for c in 0..d {
                    let diff = a[c] - b[c];
                    row[c] = diff * diff;
                }
            }
            PairFeature::Concat => {
                row[..d].copy_from_slice(a);
                row[d..].copy_from_slice(b);
            }
        }
    }
    out
}

/// The matrix being reconstructed: the transformed flows without added
/// self-loops, symmetrized for the symmetric feature.
pub fn reconstruction_target(net: &MobilityNetwork, transform: WeightTransform, feature: PairFeature) -> Matrix {
    net.transformed_dense(&AdjacencyOptions {
        transform,
        symmetrize: feature == PairFeature::SquaredDiff,
        self_loops: false,
    })
}

/// Pair generator. Pairs are drawn in region-id order and mapped to node
/// indices, so relabeling the nodes does not change the drawn sequence.
#[derive(Debug, Clone)]
pub struct PairSampler<'t> {
    target: &'t Matrix,
    order: Vec<usize>,
    sampling: PairSampling,
    nonzero: Vec<(usize, usize)>,
    zero_count: usize,
}

impl<'t> PairSampler<'t> {
    pub fn new(net: &MobilityNetwork, target: &'t Matrix, sampling: PairSampling) -> Result<Self> {
        let n = net.node_count();
        if target.shape() != (n, n) {
            return Err(Error::shape("reconstruction target", format!("{n}x{n}"), format!("{:?}", target.shape())));
        }
        let order = net.canonical_order();
        let mut nonzero = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if target[(order[a], order[b])] != 0.0 {
                    nonzero.push((a, b));
                }
            }
        }
        let zero_count = n * n - nonzero.len();
        Ok(Self {
            target,
            order,
            sampling,
            nonzero,
            zero_count,
        })
    }

    /// Pairs of one epoch, shuffled, as node indices.
    pub fn epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(usize, usize)> {
        let n = self.order.len();
        let mut ranks: Vec<(usize, usize)> = match self.sampling {
            PairSampling::AllPairs => (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect(),
            PairSampling::Balanced => {
                let mut out = self.nonzero.clone();
                if self.zero_count <= self.nonzero.len() {
                    for a in 0..n {
                        for b in 0..n {
                            if self.target[(self.order[a], self.order[b])] == 0.0 {
                                out.push((a, b));
                            }
                        }
                    }
                } else {
                    let mut drawn = 0;
                    while drawn < self.nonzero.len() {
                        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                        if self.target[(self.order[a], self.order[b])] == 0.0 {
                            out.push((a, b));
                            drawn += 1;
                        }
                    }
                }
                out
            }
        };
        ranks.shuffle(rng);
        ranks.into_iter().map(|(a, b)| (self.order[a], self.order[b])).collect()
    }

    /// One epoch cut into batches of at most `batch_size` pairs.
    pub fn batches<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<PairwiseBatch> {
        self.epoch(rng)
            .chunks(batch_size.max(1))
            .map(|chunk| PairwiseBatch {
                origins: chunk.iter().map(|p| p.0).collect(),
                destinations: chunk.iter().map(|p| p.1).collect(),
                targets: chunk.iter().map(|&(i, j)| self.target[(i, j)]).collect(),
            })
            .collect()
    }
}

/// One epoch of batches over the reconstruction target of `net`.
pub fn make_pairs<R: Rng + ?Sized>(
    e: &Matrix,
    net: &MobilityNetwork,
    target: &Matrix,
    sampling: PairSampling,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<PairwiseBatch>> {
    if e.rows() != net.node_count() {
        return Err(Error::shape("embedding rows", net.node_count(), e.rows()));
    }
    Ok(PairSampler::new(net, target, sampling)?.batches(batch_size, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnnConfig {
    pub d: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` picks all-pairs up to [`ALL_PAIRS_MAX_NODES`] nodes, balanced above.
    pub sampling: Option<PairSampling>,
    pub feature: PairFeature,
    pub transform: WeightTransform,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Stop after this many epochs without a relative improvement of at
    /// least `min_rel_improvement`; 0 disables early stopping.
    pub patience: usize,
    pub min_rel_improvement: f64,
    /// Half-width of the uniform noise filling embedding columns beyond
    /// those copied from the starting embedding.
    pub init_noise: f64,
}

impl Default for VnnConfig {
    fn default() -> Self {
        Self {
            d: 5,
            epochs: 200,
            batch_size: 4096,
            sampling: None,
            feature: PairFeature::SquaredDiff,
            transform: WeightTransform::Log1p,
            optimizer: OptimizerConfig::adam(1e-2),
            seed: 0,
            patience: 20,
            min_rel_improvement: 1e-4,
            init_noise: 0.1,
        }
    }
}

impl VnnConfig {
    pub fn sampling_for(&self, n: usize) -> PairSampling {
        self.sampling.unwrap_or(if n <= ALL_PAIRS_MAX_NODES {
            PairSampling::AllPairs
        } else {
            PairSampling::Balanced
        })
    }

    /// Hidden widths of the reconstruction MLP.
    pub fn hidden_sizes(&self) -> [usize; 3] {
        [4 * self.d, 3 * self.d, self.d]
    }
}

/// Trainable embedding plus reconstruction MLP.
#[derive(Debug, Clone)]
pub struct VnnEmbedModel {
    config: VnnConfig,
    params: ModelParams,
    embedding: ParamId,
    mlp: Mlp,
    order: Vec<usize>,
    loss_trace: Vec<f64>,
    initial_mse: f64,
    final_mse: f64,
}

impl VnnEmbedModel {
    /// Untrained model; `init` supplies leading embedding columns.
    pub fn new(net: &MobilityNetwork, init: Option<&EmbeddingMatrix>, config: &VnnConfig) -> Result<Self> {
        let n = net.node_count();
        let d = config.d;
        if d == 0 {
            return Err(Error::invalid("embedding dimension must be >= 1"));
        }
        if let Some(e0) = init {
            if e0.rows() != n {
                return Err(Error::shape("initial embedding rows", n, e0.rows()));
            }
        }
        let mut rng = seeded_rng(config.seed);
        let order = net.canonical_order();
        let copied = init.map(|e0| e0.standardized());
        let keep = copied.as_ref().map_or(0, |e0| e0.dim().min(d));
        // Without a starting embedding every column is random at the unit
        // variance of a standardized embedding.
        let spread = if init.is_some() { config.init_noise } else { UNIT_UNIFORM };
        let mut e = Matrix::zeros(n, d);
        for &i in &order {
            for c in 0..d {
                e[(i, c)] = if c < keep {
                    copied.as_ref().expect("keep > 0").values()[(i, c)]
                } else {
                    rng.gen_range(-spread..=spread)
                };
            }
        }
        let mut params = ModelParams::new();
        let embedding = params.add("vnn.embedding", e)?;
        let h = config.hidden_sizes();
        let sizes = [config.feature.input_width(d), h[0], h[1], h[2], 1];
        let mlp = Mlp::new(&mut params, "vnn.mlp", &sizes, Activation::Relu, &mut rng)?;
        Ok(Self {
            config: config.clone(),
            params,
            embedding,
            mlp,
            order,
            loss_trace: Vec::new(),
            initial_mse: f64::NAN,
            final_mse: f64::NAN,
        })
    }

    pub fn config(&self) -> &VnnConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn embedding_param(&self) -> ParamId {
        self.embedding
    }

    /// Current embedding, tagged as VNN-trained.
    pub fn embedding(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(self.params.value(self.embedding).clone(), EmbeddingMethod::VnnTrained)
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    /// Full reconstruction MSE before the first update.
    pub fn initial_mse(&self) -> f64 {
        self.initial_mse
    }

    /// Full reconstruction MSE after training.
    pub fn final_mse(&self) -> f64 {
        self.final_mse
    }

    pub fn epochs_run(&self) -> usize {
        self.loss_trace.len()
    }

    /// Predicted `N×N` matrix.
    pub fn reconstruct(&self) -> Result<Matrix> {
        let e = self.params.value(self.embedding);
        let n = e.rows();
        let mut out = Matrix::zeros(n, n);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        for chunk in pairs.chunks(self.config.batch_size.max(1)) {
            let o: Vec<usize> = chunk.iter().map(|p| p.0).collect();
            let t: Vec<usize> = chunk.iter().map(|p| p.1).collect();
            let pred = self.mlp.predict(&self.params, &pair_features(e, &o, &t, self.config.feature))?;
            for (k, &(i, j)) in chunk.iter().enumerate() {
                out[(i, j)] = pred[(k, 0)];
            }
        }
        Ok(out)
    }

    /// `(1/N²) Σ (target − prediction)²`, summed in region-id order.
    pub fn reconstruction_mse(&self, target: &Matrix) -> Result<f64> {
        let pred = self.reconstruct()?;
        if pred.shape() != target.shape() {
            return Err(Error::shape("reconstruction target", format!("{:?}", pred.shape()), format!("{:?}", target.shape())));
        }
        let mut total = 0.0;
        for &i in &self.order {
            for &j in &self.order {
                let r = target[(i, j)] - pred[(i, j)];
                total += r * r;
            }
        }
        let n = self.order.len() as f64;
        Ok(total / (n * n))
    }

    /// Loss of one batch, recorded and back-propagated into the gradients.
    pub fn batch_loss(&mut self, batch: &PairwiseBatch) -> Result<f64> {
        let mut tape = Tape::new();
        let e = tape.param(&self.params, self.embedding);
        let ei = tape.gather_rows(e, batch.origins.clone())?;
        let ej = tape.gather_rows(e, batch.destinations.clone())?;
        let x = match self.config.feature {
            PairFeature::SquaredDiff => {
                let diff = tape.sub(ei, ej)?;
                tape.square(diff)
            }
            PairFeature::Concat => tape.concat_cols(&[ei, ej])?,
        };
        let pred = self.mlp.forward(&mut tape, &self.params, x)?;
        let loss = tape.mse(pred, &batch.target_column(), None)?;
        let value = tape.value(loss)[(0, 0)];
        tape.backward(loss, &mut self.params)?;
        Ok(value)
    }
}

/// Joint gradient descent on the embedding and reconstruction MLP.
pub fn train_vnn_embedding(
    net: &MobilityNetwork,
    init: Option<&EmbeddingMatrix>,
    config: &VnnConfig,
) -> Result<VnnEmbedModel> {
    let mut model = VnnEmbedModel::new(net, init, config)?;
    let target = reconstruction_target(net, config.transform, config.feature);
    let sampler = PairSampler::new(net, &target, config.sampling_for(net.node_count()))?;
    // Separate stream from the initialization so the pair order does not
    // depend on the embedding width.
    let mut rng = seeded_rng(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    // Centre hidden units on the first epoch's pairs and start the output
    // at the mean target.
    let first = sampler.batches(config.batch_size, &mut seeded_rng(config.seed));
    if let Some(b) = first.first() {
        let x = b.features(model.params.value(model.embedding), config.feature);
        model.mlp.center_hidden_biases(&mut model.params, &x)?;
    }
    let mean = target.as_slice().iter().sum::<f64>() / target.as_slice().len() as f64;
    let out_bias = model.mlp.layers().last().expect("non-empty").bias;
    model.params.set_value(out_bias, Matrix::scalar(mean))?;
    let mut opt = Optimizer::new(config.optimizer, &model.params);
    model.initial_mse = model.reconstruction_mse(&target)?;

    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in sampler.batches(config.batch_size, &mut rng) {
            let loss = model.batch_loss(&batch).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("reconstruction loss at epoch {epoch}: {m}")),
                other => other,
            })?;
            opt.step(&mut model.params)?;
            total += loss * batch.len() as f64;
            count += batch.len();
        }
        let epoch_loss = total / count.max(1) as f64;
        model.loss_trace.push(epoch_loss);
        if config.patience > 0 {
            if epoch_loss < best * (1.0 - config.min_rel_improvement) {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    model.final_mse = model.reconstruction_mse(&target)?;
    if !model.final_mse.is_finite() {
        return Err(Error::NonFinite("final reconstruction MSE".into()));
    }
    Ok(model)
}

/// Supervised regression head settings.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 64, 32],
            epochs: 500,
            batch_size: 32,
            optimizer: OptimizerConfig::adam(1e-2),
            seed: 0,
        }
    }
}

/// A trained head and its test-set report.
#[derive(Debug, Clone)]
pub struct HeadFit {
    pub params: ModelParams,
    pub mlp: Mlp,
    pub scaler: TargetScaler,
    pub loss_trace: Vec<f64>,
    pub report: EvalReport,
}

impl HeadFit {
    /// Predictions on the original target scale for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let out = self.mlp.predict(&self.params, x)?;
        Ok(out.as_slice().iter().map(|&v| self.scaler.inverse(v)).collect())
    }
}

/// Trains an MLP from rows of `x` to the standardized target on the train
/// nodes and reports R² on the test nodes.
pub fn fit_head(x: &Matrix, targets: &[Option<f64>], part: &Partition, config: &HeadConfig) -> Result<HeadFit> {
    if x.rows() != targets.len() {
        return Err(Error::shape("head inputs", targets.len(), x.rows()));
    }
    if part.train.is_empty() || part.test.is_empty() {
        return Err(Error::Empty("train or test partition".into()));
    }
    let train_y = collect_targets(targets, &part.train, "train")?;
    let test_y = collect_targets(targets, &part.test, "test")?;
    if train_y.iter().all(|&v| v == train_y[0]) {
        return Err(Error::invalid("training target is constant"));
    }
    let scaler = TargetScaler::fit(&train_y);

    let mut rng = seeded_rng(config.seed);
    let mut params = ModelParams::new();
    let mut sizes = vec![x.cols()];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(1);
    let mlp = Mlp::new(&mut params, "head", &sizes, Activation::Relu, &mut rng)?;
    let mut opt = Optimizer::new(config.optimizer, &params);

    let mut order: Vec<usize> = (0..part.train.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let rows: Vec<usize> = chunk.iter().map(|&k| part.train[k]).collect();
            let y = Matrix::column_vector(chunk.iter().map(|&k| scaler.forward(train_y[k])).collect());
            let mut tape = Tape::new();
            let xb = tape.constant(x.select_rows(&rows));
            let pred = mlp.forward(&mut tape, &params, xb)?;
            let loss = tape.mse(pred, &y, None)?;
            let value = tape.value(loss)[(0, 0)];
            tape.backward(loss, &mut params).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("head loss at epoch {epoch}: {m}")),
                other => other,
            })?;
            opt.step(&mut params)?;
            total += value * chunk.len() as f64;
        }
        loss_trace.push(total / order.len() as f64);
    }

    let pred = mlp.predict(&params, &x.select_rows(&part.test))?;
    let y_hat: Vec<f64> = pred.as_slice().iter().map(|&v| scaler.inverse(v)).collect();
    let report = EvalReport::new(part.test.clone(), test_y, y_hat, fingerprint(config), config.seed)?;
    Ok(HeadFit {
        params,
        mlp,
        scaler,
        loss_trace,
        report,
    })
}

/// Second stage of the two-step pipeline on fold `fold` of `split`.
pub fn predict_income_from_embedding(
    e: &EmbeddingMatrix,
    targets: &[Option<f64>],
    split: &SplitPlan,
    fold: usize,
    head: &HeadConfig,
) -> Result<EvalReport> {
    let x = e.standardized();
    Ok(fit_head(x.values(), targets, &split.partition(fold)?, head)?.report)
}

fn collect_targets(targets: &[Option<f64>], nodes: &[usize], side: &str) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&i| {
            targets
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Missing(format!("target of {side} node {i}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{GeoLevel, RegionId};

    fn regions(n: usize) -> Vec<RegionId> {
        (0..n)
            .map(|i| RegionId::parse(&format!("{:011}", 17031000000u64 + i as u64), GeoLevel::Tract).unwrap())
            .collect()
    }

    #[test]
    fn two_node_enumeration() {
        let net = MobilityNetwork::from_dense(regions(2), &Matrix::zeros(2, 2)).unwrap();
        let target = Matrix::zeros(2, 2);
        let s = PairSampler::new(&net, &target, PairSampling::AllPairs).unwrap();
        let mut pairs = s.epoch(&mut seeded_rng(0));
        pairs.sort();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn squared_difference_features() {
        let e = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let f = pair_features(&e, &[0, 1], &[1, 1], PairFeature::SquaredDiff);
        assert_eq!(f.row(0), &[4.0, 4.0]);
        assert_eq!(f.row(1), &[0.0, 0.0]);
        let c = pair_features(&e, &[0], &[1], PairFeature::Concat);
        assert_eq!(c.row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn balanced_sampling_matches_nonzero_count() {
        let mut w = Matrix::zeros(30, 30);
        w[(0, 1)] = 3.0;
        w[(4, 2)] = 1.0;
        let net = MobilityNetwork::from_dense(regions(30), &w).unwrap();
        let target = reconstruction_target(&net, WeightTransform::Log1p, PairFeature::SquaredDiff);
        let s = PairSampler::new(&net, &target, PairSampling::Balanced).unwrap();
        let pairs = s.epoch(&mut seeded_rng(3));
        assert_eq!(pairs.len(), 8);
        let nz = pairs.iter().filter(|&&(i, j)| target[(i, j)] != 0.0).count();
        assert_eq!(nz, 4);
    }

    #[test]
    fn zero_dimension_rejected() {
        let net = MobilityNetwork::from_dense(regions(3), &Matrix::zeros(3, 3)).unwrap();
        let cfg = VnnConfig { d: 0, ..Default::default() };
        assert!(train_vnn_embedding(&net, None, &cfg).is_err());
    }

    #[test]
    fn zero_adjacency_reconstructs_zero() {
        let net = MobilityNetwork::from_dense(regions(8), &Matrix::zeros(8, 8)).unwrap();
        let cfg = VnnConfig { d: 2, epochs: 300, patience: 0, optimizer: OptimizerConfig::adam(1e-2), ..Default::default() };
        let model = train_vnn_embedding(&net, None, &cfg).unwrap();
        assert!(model.final_mse() < 1e-6, "{}", model.final_mse());
    }

    #[test]
    fn hidden_sizes_follow_dimension() {
        let net = MobilityNetwork::from_dense(regions(4), &Matrix::zeros(4, 4)).unwrap();
        let cfg = VnnConfig { d: 3, ..Default::default() };
        let model = VnnEmbedModel::new(&net, None, &cfg).unwrap();
        assert_eq!(model.mlp().sizes(), &[3, 12, 9, 3, 1]);
        assert_eq!(model.embedding().dim(), 3);
        assert_eq!(model.params().name(model.embedding_param()), "vnn.embedding");
    }
}
