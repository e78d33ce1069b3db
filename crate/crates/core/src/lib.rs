//! Semi-supervised learning from demonstration with a pre-trained haptic
//! representation encoder.
//!
//! A β-VAE is pre-trained on unlabelled force/torque explorations of simulated
//! objects. Its encoder is then frozen and a motion decoder is trained on a
//! handful of demonstrations that pair an exploration with a wiping motion.

pub mod contact;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod lfd;
pub mod numerics;
pub mod rng;
pub mod signal;
pub mod store;
pub mod trajectory;
pub mod vae;

pub use error::{Error, Result};

/// The guide in `book/` is compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/signal.md")]
    mod signal {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/vae.md")]
    mod vae {}
    #[doc = include_str!("../../../book/src/lfd.md")]
    mod lfd {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/experiment.md")]
    mod experiment {}
    #[doc = include_str!("../../../book/src/artifacts.md")]
    mod artifacts {}
}
