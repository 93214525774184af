//! Kolmogorov-Arnold network with B-spline edge functions.
//!
//! Each edge computes `w_base * silu(x) + w_spline * sum_j c_j B_j(x)`; each
//! node sums its incoming edges plus a bias. Layers are evaluated as one dense
//! product per layer by expanding every input into `[silu(x), B_0(x), ..]`.

mod adam;
mod network;
mod spline;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use network::{edge_eval, loss_mae, KanEdge, KanGradients, KanLayer, KanNetwork};
pub use spline::{bspline_basis, bspline_basis_derivative, GridSpec, SplineGrid};
pub use train::{train, validation_mae, Samples, TrainConfig, TrainStep, TrainTrace};
