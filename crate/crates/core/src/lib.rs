//! Markov-modulated counting processes: exact transient and conditional
//! distributions, characteristic functions, hidden-chain filtering, and
//! rapid-switching limits, each backed by an independent Monte Carlo oracle.
//!
//! The two model families are a finite pool of obligors whose common default
//! intensity is driven by a background chain (`binomial_model`) and the
//! Markov-modulated Poisson process (`poisson_model`). Both reduce to small
//! structured matrix exponentials; `linalg` holds those kernels, `chain` the
//! background-chain machinery, `filtering` the jump-observation filter,
//! `rapid_limits` the fast-switching diagnostics, and `montecarlo` the
//! simulation oracle used to validate every closed form.

pub mod binomial_model;
pub mod chain;
mod error;
pub mod filtering;
pub mod fourier;
pub mod linalg;
pub mod montecarlo;
pub mod poisson_model;
pub mod rapid_limits;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};

use binomial_model::ObligorModel;
use poisson_model::PoissonModel;

/// A counting-process model: either a finite obligor pool or the
/// Markov-modulated Poisson process. The count intensity in chain state `j`
/// with current count `k` is `lambda_j * f(k)` where `f(k) = n - k` for the
/// obligor pool and `f(k) = 1` for the Poisson case.
#[derive(Debug, Clone)]
pub enum Model {
    Binomial(ObligorModel),
    Poisson(PoissonModel),
}

impl Model {
    pub fn generator(&self) -> &chain::GeneratorMatrix {
        match self {
            Model::Binomial(m) => m.generator(),
            Model::Poisson(m) => m.generator(),
        }
    }

    pub fn rates(&self) -> &chain::RateVector {
        match self {
            Model::Binomial(m) => m.rates(),
            Model::Poisson(m) => m.rates(),
        }
    }

    pub fn initial_law(&self) -> &[f64] {
        match self {
            Model::Binomial(m) => m.initial_law(),
            Model::Poisson(m) => m.initial_law(),
        }
    }

    /// Count-rate multiplier `f(k)`.
    pub fn count_factor(&self, count: usize) -> f64 {
        match self {
            Model::Binomial(m) => m.obligors().saturating_sub(count) as f64,
            Model::Poisson(_) => 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.generator().dim()
    }
}
