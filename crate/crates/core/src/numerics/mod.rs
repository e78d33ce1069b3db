//! Dense linear algebra, reverse-mode gradients, layers and the Adam optimizer.
//!
//! Just enough machinery for single-hidden-layer encoder/decoder networks in
//! 64-bit floating point.

mod adam;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use layers::{dropout, dropout_mask, he_uniform, linear_forward, relu};
pub use params::ParamSet;
pub use tape::{value_and_grad, Gradients, ParamVars, Tape, Var};
pub use tensor::{matmul, Tensor2};

/// Zero-initialised bias row plus fan-in-scaled weights for an `inputs → outputs` layer.
pub fn init_affine(
    params: &mut ParamSet,
    prefix: &str,
    inputs: usize,
    outputs: usize,
    rng: &mut crate::rng::RandomStream,
) -> crate::Result<()> {
    params.insert(format!("{prefix}.w"), he_uniform(outputs, inputs, rng))?;
    params.insert(format!("{prefix}.b"), Tensor2::zeros(1, outputs))
}
