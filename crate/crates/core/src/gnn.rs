//! Two graph layers (GCN or GAT) under an MLP head, trained end-to-end on a
//! node target with a loss masked to the training nodes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::embeddings::{EmbeddingMatrix, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::eval::{fingerprint, EvalReport, Partition, TargetScaler};
use crate::graph::{normalize_adjacency, MobilityNetwork, Topology, WeightTransform};
use crate::linalg::{Csr, Matrix};
use crate::nn::{
    dropout_mask, glorot_uniform, seeded_rng, Activation, Mlp, ModelParams, Optimizer, OptimizerConfig,
    ParamId, Rng, Tape, Var,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Gcn,
    Gat,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Gcn => "gcn",
            LayerKind::Gat => "gat",
        }
    }
}

/// How attention heads are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    Concat,
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnConfig {
    pub layer_kind: LayerKind,
    /// Per-head output widths of the two graph layers.
    pub hidden: (usize, usize),
    pub heads: usize,
    pub leaky_slope: f64,
    /// Hidden widths of the regression head.
    pub head_hidden: Vec<usize>,
    /// Loss over training nodes only; otherwise over every node with a target.
    pub masked_loss: bool,
    pub dropout: f64,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub transform: WeightTransform,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            layer_kind: LayerKind::Gcn,
            hidden: (64, 16),
            heads: 4,
            leaky_slope: 0.2,
            head_hidden: vec![32],
            masked_loss: true,
            dropout: 0.0,
            epochs: 200,
            optimizer: OptimizerConfig::adam(5e-3),
            transform: WeightTransform::Log1p,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return Err(Error::invalid("graph layer widths must be positive"));
        }
        if self.layer_kind == LayerKind::Gat && self.heads == 0 {
            return Err(Error::invalid("GAT needs at least one head"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of `H¹`: `h₁`, times the head count for concatenated GAT heads.
    pub fn layer1_width(&self) -> usize {
        match self.layer_kind {
            LayerKind::Gcn => self.hidden.0,
            LayerKind::Gat => self.hidden.0 * self.heads,
        }
    }
}

/// Graph operators shared by every forward pass over one network.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInputs {
    pub a_hat: Csr,
    pub topology: Topology,
}

impl GraphInputs {
    pub fn new(net: &MobilityNetwork, transform: WeightTransform) -> Self {
        Self {
            a_hat: normalize_adjacency(net, true, transform).matrix().clone(),
            topology: Topology::from_network(net),
        }
    }

    pub fn node_count(&self) -> usize {
        self.a_hat.n_rows()
    }
}

/// `σ(Â·H·W + B)`.
pub fn gcn_layer<'a>(tape: &mut Tape<'a>, a_hat: &'a Csr, h: Var, w: Var, b: Var, act: Activation) -> Result<Var> {
    let ah = tape.spmm(a_hat, h)?;
    let z = tape.matmul(ah, w)?;
    let z = tape.add_row(z, b)?;
    Ok(activate(tape, z, act))
}

/// Projection and attention vector of one head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadVars {
    pub w: Var,
    /// `2h×1`; the first half scores the receiving node, the second the neighbor.
    pub a: Var,
}

/// Attention layer. Returns the output and, per head, the `E×1` attention
/// coefficients in the edge order of `topo`.
pub fn gat_layer<'a>(
    tape: &mut Tape<'a>,
    topo: &'a Topology,
    h: Var,
    heads: &[HeadVars],
    act: Activation,
    combine: Combine,
    slope: f64,
) -> Result<(Var, Vec<Var>)> {
    if heads.is_empty() {
        return Err(Error::invalid("attention layer without heads"));
    }
    let n = topo.node_count();
    if tape.value(h).rows() != n {
        return Err(Error::shape("attention layer input rows", n, tape.value(h).rows()));
    }
    let mut outputs = Vec::with_capacity(heads.len());
    let mut attention = Vec::with_capacity(heads.len());
    for head in heads {
        let z = tape.matmul(h, head.w)?;
        let width = tape.value(z).cols();
        if tape.value(head.a).shape() != (2 * width, 1) {
            return Err(Error::shape(
                "attention vector",
                format!("{}x1", 2 * width),
                format!("{:?}", tape.value(head.a).shape()),
            ));
        }
        // aᵀ[z_i ‖ z_j] = z_i·a_recv + z_j·a_nbr, scored per node then gathered.
        let a_recv = tape.slice_rows(head.a, 0, width)?;
        let a_nbr = tape.slice_rows(head.a, width, width)?;
        let s_recv = tape.matmul(z, a_recv)?;
        let s_nbr = tape.matmul(z, a_nbr)?;
        let s_i = tape.gather_rows(s_recv, topo.targets())?;
        let s_j = tape.gather_rows(s_nbr, topo.sources())?;
        let score = tape.add(s_i, s_j)?;
        let score = tape.leaky_relu(score, slope);
        let zj = tape.gather_rows(z, topo.sources())?;
        let alpha = tape.segment_softmax(score, topo.targets(), n)?;
        let msg = tape.mul_col(zj, alpha)?;
        outputs.push(tape.segment_sum(msg, topo.targets(), n)?);
        attention.push(alpha);
    }
    let out = match combine {
        Combine::Concat => {
            let acted: Vec<Var> = outputs.into_iter().map(|o| activate(tape, o, act)).collect();
            tape.concat_cols(&acted)?
        }
        Combine::Average => {
            let mut acc = outputs[0];
            for &o in &outputs[1..] {
                acc = tape.add(acc, o)?;
            }
            let avg = tape.scale(acc, 1.0 / heads.len() as f64);
            activate(tape, avg, act)
        }
    };
    Ok((out, attention))
}

fn activate(tape: &mut Tape<'_>, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Linear => x,
    }
}

/// [`gcn_layer`] on plain matrices.
pub fn gcn_layer_forward(h: &Matrix, a_hat: &Csr, w: &Matrix, b: &Matrix, act: Activation) -> Result<Matrix> {
    let mut tape = Tape::new();
    let (h, w, b) = (tape.constant(h.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let out = gcn_layer(&mut tape, a_hat, h, w, b, act)?;
    Ok(tape.value(out).clone())
}

/// [`gat_layer`] on plain matrices; `heads` holds `(W, a)` per head.
/// Attention comes back as one vector per head in topology edge order.
pub fn gat_layer_forward(
    h: &Matrix,
    topo: &Topology,
    heads: &[(Matrix, Matrix)],
    act: Activation,
    combine: Combine,
    slope: f64,
) -> Result<(Matrix, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let vars: Vec<HeadVars> = heads
        .iter()
        .map(|(w, a)| HeadVars {
            w: tape.constant(w.clone()),
            a: tape.constant(a.clone()),
        })
        .collect();
    let (out, alpha) = gat_layer(&mut tape, topo, hv, &vars, act, combine, slope)?;
    let alpha = alpha.iter().map(|&v| tape.value(v).as_slice().to_vec()).collect();
    Ok((tape.value(out).clone(), alpha))
}

#[derive(Debug, Clone, PartialEq)]
enum GraphLayer {
    Gcn { w: ParamId, b: ParamId },
    Gat { heads: Vec<(ParamId, ParamId)> },
}

impl GraphLayer {
    fn new(
        params: &mut ModelParams,
        prefix: &str,
        kind: LayerKind,
        fan_in: usize,
        width: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(match kind {
            LayerKind::Gcn => GraphLayer::Gcn {
                w: params.add(format!("{prefix}.w"), glorot_uniform(fan_in, width, rng))?,
                b: params.add(format!("{prefix}.b"), Matrix::zeros(1, width))?,
            },
            LayerKind::Gat => {
                let mut list = Vec::with_capacity(heads);
                for k in 0..heads {
                    let w = params.add(format!("{prefix}.h{k}.w"), glorot_uniform(fan_in, width, rng))?;
                    let a = params.add(format!("{prefix}.h{k}.a"), glorot_uniform(2 * width, 1, rng))?;
                    list.push((w, a));
                }
                GraphLayer::Gat { heads: list }
            }
        })
    }
}

/// Layer outputs `H⁰, H¹, H²` and, for GAT, attention per layer and head.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub h: [Matrix; 3],
    pub attention: Vec<Vec<Vec<f64>>>,
}

struct ForwardVars {
    hidden: [Var; 3],
    output: Var,
    attention: Vec<Vec<Var>>,
}

/// Graph layers plus regression head.
#[derive(Debug, Clone)]
pub struct GnnModel {
    config: GnnConfig,
    input_dim: usize,
    params: ModelParams,
    layers: [GraphLayer; 2],
    head: Mlp,
    scaler: Option<TargetScaler>,
    loss_trace: Vec<f64>,
}

impl GnnModel {
    pub fn new(input_dim: usize, config: &GnnConfig) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::invalid("input embedding has no columns"));
        }
        let mut rng = seeded_rng(config.seed);
        let mut params = ModelParams::new();
        let (h1, h2) = config.hidden;
        let kind = config.layer_kind;
        let l1 = GraphLayer::new(&mut params, "gnn.l1", kind, input_dim, h1, config.heads, &mut rng)?;
        let l2 = GraphLayer::new(&mut params, "gnn.l2", kind, config.layer1_width(), h2, config.heads, &mut rng)?;
        let mut sizes = vec![h2];
        sizes.extend_from_slice(&config.head_hidden);
        sizes.push(1);
        let head = Mlp::new(&mut params, "gnn.head", &sizes, Activation::Relu, &mut rng)?;
        Ok(Self {
            config: config.clone(),
            input_dim,
            params,
            layers: [l1, l2],
            head,
            scaler: None,
            loss_trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn is_trained(&self) -> bool {
        self.scaler.is_some()
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn target_scaler(&self) -> Option<TargetScaler> {
        self.scaler
    }

    fn forward<'a>(
        &self,
        tape: &mut Tape<'a>,
        inputs: &'a GraphInputs,
        h0: &Matrix,
        mut dropout: Option<&mut Rng>,
    ) -> Result<ForwardVars> {
        let n = inputs.node_count();
        if h0.shape() != (n, self.input_dim) {
            return Err(Error::shape(
                "initial embedding",
                format!("{n}x{}", self.input_dim),
                format!("{}x{}", h0.rows(), h0.cols()),
            ));
        }
        let x0 = tape.constant(h0.clone());
        let mut hidden = [x0; 3];
        let mut attention = Vec::new();
        let mut h = x0;
        for (l, layer) in self.layers.iter().enumerate() {
            if let Some(rng) = dropout.as_deref_mut() {
                if self.config.dropout > 0.0 {
                    let (r, c) = tape.value(h).shape();
                    let mask = tape.constant(dropout_mask(r, c, self.config.dropout, rng));
                    h = tape.mul(h, mask)?;
                }
            }
            let act = if l == 0 { Activation::Relu } else { Activation::Linear };
            h = match layer {
                GraphLayer::Gcn { w, b } => {
                    let w = tape.param(&self.params, *w);
                    let b = tape.param(&self.params, *b);
                    gcn_layer(tape, &inputs.a_hat, h, w, b, act)?
                }
                GraphLayer::Gat { heads } => {
                    let vars: Vec<HeadVars> = heads
                        .iter()
                        .map(|&(w, a)| HeadVars {
                            w: tape.param(&self.params, w),
                            a: tape.param(&self.params, a),
                        })
                        .collect();
                    let combine = if l == 0 { Combine::Concat } else { Combine::Average };
                    let (out, alpha) =
                        gat_layer(tape, &inputs.topology, h, &vars, act, combine, self.config.leaky_slope)?;
                    attention.push(alpha);
                    out
                }
            };
            hidden[l + 1] = h;
        }
        let output = self.head.forward(tape, &self.params, h)?;
        Ok(ForwardVars {
            hidden,
            output,
            attention,
        })
    }

    /// Forward pass without dropout; available before training.
    pub fn layer_states(&self, inputs: &GraphInputs, h0: &Matrix) -> Result<LayerState> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, inputs, h0, None)?;
        Ok(LayerState {
            h: f.hidden.map(|v| tape.value(v).clone()),
            attention: f
                .attention
                .iter()
                .map(|heads| heads.iter().map(|&a| tape.value(a).as_slice().to_vec()).collect())
                .collect(),
        })
    }

    /// Head output on the standardized target scale.
    pub fn raw_output(&self, inputs: &GraphInputs, h0: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, inputs, h0, None)?;
        Ok(tape.value(f.output).as_slice().to_vec())
    }

    /// Predictions on the original target scale.
    pub fn predict(&self, inputs: &GraphInputs, h0: &Matrix) -> Result<Vec<f64>> {
        let scaler = self.scaler.ok_or_else(|| Error::invalid("model has not been trained"))?;
        Ok(self.raw_output(inputs, h0)?.into_iter().map(|v| scaler.inverse(v)).collect())
    }

    /// Masked MSE of the head output against `y` (`N×1`, standardized).
    /// Gradients are accumulated into the parameters.
    pub fn loss_with_grad(
        &mut self,
        inputs: &GraphInputs,
        h0: &Matrix,
        y: &Matrix,
        mask: &[bool],
        dropout: Option<&mut Rng>,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, inputs, h0, dropout)?;
        let loss = tape.mse(f.output, y, Some(mask))?;
        let value = tape.value(loss)[(0, 0)];
        tape.backward(loss, &mut self.params)?;
        Ok(value)
    }

    /// Masked MSE without recording gradients.
    pub fn loss(&self, inputs: &GraphInputs, h0: &Matrix, y: &Matrix, mask: &[bool]) -> Result<f64> {
        let out = Matrix::column_vector(self.raw_output(inputs, h0)?);
        crate::nn::mse_value(&out, y, Some(mask))
    }

    /// `H¹` or `H²` of a trained model.
    pub fn extract_hidden(&self, inputs: &GraphInputs, h0: &Matrix, layer: usize) -> Result<EmbeddingMatrix> {
        if !self.is_trained() {
            return Err(Error::invalid("hidden states requested from an untrained model"));
        }
        if !(1..=2).contains(&layer) {
            return Err(Error::invalid(format!("graph layer {layer} does not exist; use 1 or 2")));
        }
        let state = self.layer_states(inputs, h0)?;
        Ok(EmbeddingMatrix::new(state.h[layer].clone(), EmbeddingMethod::GnnHidden))
    }
}

/// A trained model with its test-set report.
#[derive(Debug, Clone)]
pub struct GnnRun {
    pub model: GnnModel,
    pub report: EvalReport,
}

/// Transductive training: full-graph forward pass, loss on the training
/// nodes, R² on the test nodes.
pub fn train_end_to_end(
    inputs: &GraphInputs,
    h0: &EmbeddingMatrix,
    targets: &[Option<f64>],
    part: &Partition,
    config: &GnnConfig,
) -> Result<GnnRun> {
    let n = inputs.node_count();
    if targets.len() != n || h0.rows() != n {
        return Err(Error::shape("node count", n, format!("{} targets, {} embedding rows", targets.len(), h0.rows())));
    }
    if part.train.is_empty() {
        return Err(Error::Empty("training mask".into()));
    }
    let mut train_y = Vec::with_capacity(part.train.len());
    for &i in &part.train {
        train_y.push(targets[i].ok_or_else(|| Error::Missing(format!("target of train node {i}")))?);
    }
    let scaler = TargetScaler::fit(&train_y);

    let mut y = Matrix::zeros(n, 1);
    let mut mask = vec![false; n];
    for (i, t) in targets.iter().enumerate() {
        if let Some(v) = t {
            y[(i, 0)] = scaler.forward(*v);
        }
    }
    if config.masked_loss {
        for &i in &part.train {
            mask[i] = true;
        }
    } else {
        for (m, t) in mask.iter_mut().zip(targets) {
            *m = t.is_some();
        }
    }

    let mut model = GnnModel::new(h0.dim(), config)?;
    let mut opt = Optimizer::new(config.optimizer, &model.params);
    let mut dropout_rng = seeded_rng(config.seed ^ 0xd1b5_4a32_d192_ed03);
    for epoch in 0..config.epochs {
        let loss = model
            .loss_with_grad(inputs, h0.values(), &y, &mask, Some(&mut dropout_rng))
            .map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("training loss at epoch {epoch}: {m}")),
                other => other,
            })?;
        opt.step(&mut model.params)?;
        model.loss_trace.push(loss);
    }
    model.scaler = Some(scaler);

    let pred = model.predict(inputs, h0.values())?;
    let mut test_y = Vec::with_capacity(part.test.len());
    let mut test_hat = Vec::with_capacity(part.test.len());
    for &i in &part.test {
        test_y.push(targets[i].ok_or_else(|| Error::Missing(format!("target of test node {i}")))?);
        test_hat.push(pred[i]);
    }
    let report = EvalReport::new(part.test.clone(), test_y, test_hat, fingerprint(config), config.seed)?;
    Ok(GnnRun { model, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcn_identity_passthrough() {
        let h = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [4.0, 0.0]]).unwrap();
        let eye = Csr::from_dense(&Matrix::identity(3));
        let out = gcn_layer_forward(&h, &eye, &Matrix::identity(2), &Matrix::zeros(1, 2), Activation::Linear).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn gcn_two_node_average() {
        let a = Csr::from_dense(&Matrix::filled(2, 2, 0.5));
        let h = Matrix::column_vector(vec![2.0, 4.0]);
        let out = gcn_layer_forward(&h, &a, &Matrix::scalar(1.0), &Matrix::zeros(1, 1), Activation::Linear).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 3.0]);
    }

    #[test]
    fn gat_single_self_loop() {
        let topo = Topology::from_neighbors(&[vec![0]]).unwrap();
        let h = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let w = Matrix::from_rows(&[[2.0, 0.0], [1.0, 1.0]]).unwrap();
        let a = Matrix::column_vector(vec![0.3, -0.2, 0.5, 0.1]);
        let (out, alpha) = gat_layer_forward(&h, &topo, &[(w.clone(), a)], Activation::Relu, Combine::Concat, 0.2).unwrap();
        assert_eq!(alpha, vec![vec![1.0]]);
        assert_eq!(out, h.matmul(&w).unwrap().map(|v| v.max(0.0)));
    }

    #[test]
    fn gat_empty_neighborhood_rejected() {
        assert!(Topology::from_neighbors(&[vec![0], vec![]]).is_err());
    }

    #[test]
    fn layer1_width_follows_heads() {
        let gat = GnnConfig { layer_kind: LayerKind::Gat, hidden: (8, 4), heads: 3, ..Default::default() };
        assert_eq!(gat.layer1_width(), 24);
        let gcn = GnnConfig { hidden: (8, 4), ..Default::default() };
        assert_eq!(gcn.layer1_width(), 8);
        assert!(GnnConfig { heads: 0, ..gat }.validate().is_err());
    }
}
