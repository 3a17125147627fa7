//! Robust score-based CUSUM change detection.
//!
//! Detectors built on the Hyvärinen score need only the gradient and Laplacian
//! of a log density, so they work with unnormalized models such as Gaussian
//! mixtures and Gauss-Bernoulli RBMs. The crate covers the score models and
//! their samplers, least favorable pair search, threshold calibration and a
//! Monte Carlo harness for run lengths and delays.

pub mod bench;
pub mod calibration;
pub mod detectors;
pub mod error;
pub mod lfd;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod stats;

pub use detectors::{Detector, DetectorConfig, DetectorState, LikelihoodCusum, StopOutcome};
pub use error::{Error, Result};
pub use lfd::{LfdPair, Provenance};
pub use models::{Gaussian, GaussianMixture, Gbrbm, ScoreMixture, ScoreModel};
pub use rng::RngStream;
pub use stats::Estimate;
