//! Adaptive PI temperature control of a PEM fuel cell stack, wrapped by a
//! Lyapunov-based reference governor that keeps the stack temperature
//! deviation inside a hard bound while the plant parameters are learned.
//!
//! The crate is organised bottom-up:
//!
//! * [`plant`]: thermal balance, its linearization and the stack constants.
//! * [`refmodel`]: the second-order reference model and its Lyapunov matrix.
//! * [`adaptive`]: the adaptive PI law and gradient parameter updates.
//! * [`governor`]: κ selection and command saturation.
//! * [`sim`]: fixed-step closed-loop simulation and run summaries.
//! * [`config`], [`output`], [`cli`]: scenario files, artifacts and the binary.

pub mod adaptive;
pub mod cli;
pub mod config;
pub mod error;
pub mod governor;
pub mod ode;
pub mod output;
pub mod plant;
pub mod refmodel;
pub mod sim;

pub use error::{Error, Result};

/// Guide chapters, compiled here so their snippets run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/reference-model.md")]
    mod reference_model {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/governor.md")]
    mod governor {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
