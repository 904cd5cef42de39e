//! Inertia-weighted, global-best particle swarm optimization over a box.
//!
//! Each sweep updates every particle with
//!
//! ```text
//! v <- w v + c1 r1 (p_best - x) + c2 r2 (g_best - x)
//! x <- x + v
//! ```
//!
//! with velocities clamped to a fraction of the box width and positions
//! clamped onto the box (velocity is left untouched by the position clamp).
//! The inertia `w` falls linearly from `w_start` on the first sweep to
//! `w_end` on the last. Personal bests are updated as particles move; the
//! global best is refreshed once per sweep.
//!
//! Random draws come from one ChaCha8 stream seeded by `SwarmConfig::seed`,
//! in this order: for each particle, its position components then its
//! velocity components; then for each sweep, for each particle in index
//! order, `r1` then `r2` (one value each when `scalar_rand` is set, one per
//! dimension otherwise). Dimensions with zero width still consume their
//! draws, so the stream does not depend on the shape of the box.
//!
//! Iteration 0 evaluates the initial swarm; `max_iterations` counts the
//! update sweeps that follow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Bounds;
use crate::{seeded_rng, unit_draw, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum PsoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(String),
    #[error("search box has no dimensions")]
    EmptyBounds,
    #[error("objective returned a non-finite value")]
    NonFiniteObjective,
}

pub type Result<T, E = PsoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct SwarmConfig<T> {
    pub population_size: usize,
    /// Update sweeps after the initial evaluation.
    pub max_iterations: usize,
    pub c1: T,
    pub c2: T,
    pub w_start: T,
    pub w_end: T,
    pub seed: u64,
    /// Velocities are clamped to `+-fraction * (upper - lower)` per dimension.
    pub velocity_clamp_fraction: T,
    /// Draw one `r1` and one `r2` per particle and sweep instead of one per
    /// dimension.
    pub scalar_rand: bool,
}

impl<T: Scalar> Default for SwarmConfig<T> {
    fn default() -> Self {
        Self {
            population_size: 25,
            max_iterations: 5,
            c1: T::lit(2.0),
            c2: T::lit(2.0),
            w_start: T::lit(0.9),
            w_end: T::lit(0.4),
            seed: crate::DEFAULT_SEED,
            velocity_clamp_fraction: T::one(),
            scalar_rand: false,
        }
    }
}

impl<T: Scalar> SwarmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(PsoError::InvalidConfig(msg.to_string()));
        if self.population_size < 2 {
            return fail("population_size must be at least 2");
        }
        if self.max_iterations < 1 {
            return fail("max_iterations must be at least 1");
        }
        if !(self.c1 >= T::zero() && self.c2 >= T::zero()) || !self.c1.is_finite() || !self.c2.is_finite() {
            return fail("c1 and c2 must be finite and non-negative");
        }
        if !(self.w_start >= self.w_end && self.w_end >= T::zero()) || !self.w_start.is_finite() {
            return fail("inertia must satisfy w_start >= w_end >= 0");
        }
        if !(self.velocity_clamp_fraction > T::zero() && self.velocity_clamp_fraction <= T::one()) {
            return fail("velocity_clamp_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Inertia on update sweep `sweep` (1-based).
    pub fn inertia(&self, sweep: usize) -> T {
        if self.max_iterations <= 1 {
            return self.w_start;
        }
        let frac = T::from_usize_lossy(sweep.saturating_sub(1)) / T::from_usize_lossy(self.max_iterations - 1);
        self.w_start - (self.w_start - self.w_end) * frac.min(T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCoefficients<T> {
    pub w: T,
    pub c1: T,
    pub c2: T,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(PsoError::DimensionMismatch { expected, found })
    }
}

/// The velocity rule, evaluated componentwise as
/// `w * v + c1 * r1 * (p_id - x) + c2 * r2 * (p_gd - x)`. No clamping.
pub fn velocity_update<T: Scalar>(
    v_old: &[T],
    x_old: &[T],
    p_id: &[T],
    p_gd: &[T],
    coeffs: &VelocityCoefficients<T>,
    r1: &[T],
    r2: &[T],
) -> Result<Vec<T>> {
    let n = v_old.len();
    for len in [x_old.len(), p_id.len(), p_gd.len(), r1.len(), r2.len()] {
        check_len(n, len)?;
    }
    Ok((0..n)
        .map(|i| {
            coeffs.w * v_old[i] + coeffs.c1 * r1[i] * (p_id[i] - x_old[i]) + coeffs.c2 * r2[i] * (p_gd[i] - x_old[i])
        })
        .collect())
}

/// Clamp each component into `[-v_max[i], v_max[i]]`.
pub fn clamp_velocity<T: Scalar>(v: &mut [T], v_max: &[T]) {
    for (vi, &m) in v.iter_mut().zip(v_max) {
        *vi = vi.max(-m).min(m);
    }
}

/// `x + v`, clamped onto the box.
pub fn position_update<T: Scalar>(x_old: &[T], v_new: &[T], bounds: &Bounds<T>) -> Result<Vec<T>> {
    check_len(x_old.len(), v_new.len())?;
    check_len(bounds.dim(), x_old.len())?;
    let mut x: Vec<T> = x_old.iter().zip(v_new).map(|(&x, &v)| x + v).collect();
    bounds.clamp(&mut x);
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    pub position: Vec<T>,
    pub velocity: Vec<T>,
    pub personal_best_position: Vec<T>,
    pub personal_best_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SwarmResult<T> {
    pub best_position: Vec<T>,
    pub best_value: T,
    pub iterations_run: usize,
    /// Global best value after initialization and after every sweep.
    pub history: Vec<T>,
}

/// Swarm in flight. [`maximize`] drives one to completion; stepping it by
/// hand exposes the particles between sweeps.
pub struct Swarm<'a, T: Scalar, F> {
    objective: F,
    bounds: &'a Bounds<T>,
    config: SwarmConfig<T>,
    rng: rand_chacha::ChaCha8Rng,
    v_max: Vec<T>,
    particles: Vec<Particle<T>>,
    best_position: Vec<T>,
    best_value: T,
    sweeps: usize,
    history: Vec<T>,
}

impl<'a, T: Scalar, F: Fn(&[T]) -> T> Swarm<'a, T, F> {
    /// Validate the configuration, then place and evaluate the initial swarm.
    pub fn new(objective: F, bounds: &'a Bounds<T>, config: &SwarmConfig<T>) -> Result<Self> {
        config.validate()?;
        let n = bounds.dim();
        if n == 0 {
            return Err(PsoError::EmptyBounds);
        }
        let mut rng = seeded_rng(config.seed);
        let v_max: Vec<T> = (0..n)
            .map(|i| config.velocity_clamp_fraction * bounds.range(i))
            .collect();
        let two = T::lit(2.0);

        let mut particles = Vec::with_capacity(config.population_size);
        for _ in 0..config.population_size {
            let position: Vec<T> = (0..n)
                .map(|i| {
                    let x = bounds.lower()[i] + unit_draw::<T, _>(&mut rng) * bounds.range(i);
                    // guard the half-open draw against rounding past the top
                    x.min(bounds.upper()[i])
                })
                .collect();
            let mut velocity: Vec<T> = (0..n)
                .map(|i| (two * unit_draw::<T, _>(&mut rng) - T::one()) * bounds.range(i))
                .collect();
            clamp_velocity(&mut velocity, &v_max);
            let value = objective(&position);
            if !value.is_finite() {
                return Err(PsoError::NonFiniteObjective);
            }
            particles.push(Particle {
                personal_best_position: position.clone(),
                personal_best_value: value,
                position,
                velocity,
            });
        }

        let mut swarm = Self {
            objective,
            bounds,
            config: config.clone(),
            rng,
            v_max,
            best_position: particles[0].position.clone(),
            best_value: particles[0].personal_best_value,
            particles,
            sweeps: 0,
            history: Vec::with_capacity(config.max_iterations + 1),
        };
        swarm.refresh_global_best();
        swarm.history.push(swarm.best_value);
        Ok(swarm)
    }

    fn refresh_global_best(&mut self) {
        for p in &self.particles {
            if p.personal_best_value > self.best_value {
                self.best_value = p.personal_best_value;
                self.best_position.clone_from(&p.personal_best_position);
            }
        }
    }

    fn draw(&mut self, n: usize) -> Vec<T> {
        if self.config.scalar_rand {
            vec![unit_draw(&mut self.rng); n]
        } else {
            (0..n).map(|_| unit_draw(&mut self.rng)).collect()
        }
    }

    /// One update sweep over the whole population.
    pub fn step(&mut self) -> Result<()> {
        self.sweeps += 1;
        let n = self.bounds.dim();
        let coeffs = VelocityCoefficients {
            w: self.config.inertia(self.sweeps),
            c1: self.config.c1,
            c2: self.config.c2,
        };
        for i in 0..self.particles.len() {
            let r1 = self.draw(n);
            let r2 = self.draw(n);
            let p = &self.particles[i];
            let mut velocity = velocity_update(
                &p.velocity,
                &p.position,
                &p.personal_best_position,
                &self.best_position,
                &coeffs,
                &r1,
                &r2,
            )?;
            clamp_velocity(&mut velocity, &self.v_max);
            let position = position_update(&p.position, &velocity, self.bounds)?;
            let value = (self.objective)(&position);
            if !value.is_finite() {
                return Err(PsoError::NonFiniteObjective);
            }
            let p = &mut self.particles[i];
            if value > p.personal_best_value {
                p.personal_best_value = value;
                p.personal_best_position.clone_from(&position);
            }
            p.position = position;
            p.velocity = velocity;
        }
        self.refresh_global_best();
        self.history.push(self.best_value);
        Ok(())
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn best(&self) -> (&[T], T) {
        (&self.best_position, self.best_value)
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn into_result(self) -> SwarmResult<T> {
        SwarmResult {
            best_position: self.best_position,
            best_value: self.best_value,
            iterations_run: self.sweeps,
            history: self.history,
        }
    }
}

/// Maximize `objective` over `bounds` with exactly `config.max_iterations`
/// sweeps. The result is a deterministic function of the inputs.
pub fn maximize<T, F>(objective: F, bounds: &Bounds<T>, config: &SwarmConfig<T>) -> Result<SwarmResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut swarm = Swarm::new(objective, bounds, config)?;
    for _ in 0..config.max_iterations {
        swarm.step()?;
    }
    Ok(swarm.into_result())
}
