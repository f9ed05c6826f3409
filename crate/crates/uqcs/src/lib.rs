//! Classical numerical laboratory for quantum computational spectroscopy.
//!
//! The crate simulates generalized Hadamard-test circuits for Hermitian,
//! non-Hermitian and periodically driven Hamiltonians, assembles windowed
//! quantum auto-correlation functions, and extracts eigenenergies, eigenstate
//! observables, PT-transition signatures and Floquet topological holonomy,
//! with configurable shot and gate noise.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release -p uqcs --example spin_chain_spectrum
//! cargo run --release -p uqcs --example eigenstate_tomography
//! cargo run --release -p uqcs --example shot_noise_scatter
//! cargo run --release -p uqcs --example non_hermitian_modes
//! cargo run --release -p uqcs --example pt_transition_scan
//! cargo run --release -p uqcs --example floquet_holonomy
//! cargo run --release -p uqcs --example noise_threshold
//! cargo run --release -p uqcs --example iqpe_benchmark
//! cargo run --release -p uqcs --example ssa_denoise
//! ```
//!
//! or with the thin config-driven CLI (`uqcs <experiment> --config <toml>`);
//! see the repository README for config examples.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod denoise;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod hamiltonians;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod spectroscopy;

pub use error::{Result, UqcsError};

/// Format a float with 12 significant digits, the fixed precision of every
/// CSV artifact this crate writes.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.11e}")
}
