//! Dense reverse-mode differentiation, MLP layers and first-order optimizers.

mod mlp;
mod optim;
mod params;
mod tape;

pub use mlp::{glorot_uniform, he_uniform, mlp_forward, Activation, DenseLayer, Mlp};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{ModelParams, ParamId};
pub use tape::{mse_value, Tape, Var};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used by every stochastic routine in the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverted dropout mask: entries are `0` with probability `rate`, else
/// `1/(1-rate)`.
pub fn dropout_mask<R: rand::Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> crate::linalg::Matrix {
    let keep = 1.0 - rate;
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    crate::linalg::Matrix::from_vec(rows, cols, data).expect("sized above")
}
