//! Clock-driven spiking network simulator for unsupervised digit recognition.

pub mod config;
pub mod dse;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod idx;
pub mod learning;
pub mod model_file;
pub mod neuron;
pub mod quantize;
pub mod sim;
pub mod topology;
pub mod trace;
pub mod train;

pub use config::RunConfig;
pub use error::{Error, Result};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    mod quantization {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/dse.md")]
    mod dse {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
