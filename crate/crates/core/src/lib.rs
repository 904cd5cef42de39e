//! Bank reliability estimation and prescription.
//!
//! A bank's reliability is the probability that it is healthy given its
//! financial ratios, estimated by a logistic regression fitted on labeled
//! data. The fitted model is then held fixed and maximized over the box of
//! observed ratio values with an inertia-weighted particle swarm, giving the
//! global (corner) optimum and a handful of near-optimal prescriptions.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the command line uses.

pub mod cli;
pub mod data;
pub mod json;
pub mod logistic;
pub mod oracle;
pub mod pipeline;
pub mod pso;
pub mod scalar;

pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Bounds = data::Bounds<f64>;
pub type LogisticModel = logistic::LogisticModel<f64>;
pub type FitOptions = logistic::FitOptions<f64>;
pub type FitReport = logistic::FitReport<f64>;
pub type SwarmConfig = pso::SwarmConfig<f64>;
pub type SwarmResult = pso::SwarmResult<f64>;
pub type CornerSolution = oracle::CornerSolution<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
pub type PrescriptionReport = pipeline::PrescriptionReport<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type Bounds32 = data::Bounds<f32>;
pub type LogisticModel32 = logistic::LogisticModel<f32>;
pub type SwarmConfig32 = pso::SwarmConfig<f32>;

/// Seed used when neither a flag nor `RELIOPT_SEED` provides one.
pub const DEFAULT_SEED: u64 = 1729;

/// All randomness in the crate goes through ChaCha8 seeded from a `u64`.
pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)`, taken as `f64` regardless of `T` so the stream
/// is the same for every scalar type.
pub(crate) fn unit_draw<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}
