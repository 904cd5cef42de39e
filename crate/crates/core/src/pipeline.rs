//! Two-stage pipeline: fit the reliability model on the whole dataset, then
//! maximize it over the data's bounding box with an ensemble of seeded PSO
//! runs and pick near-optimal prescriptions from the ensemble.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{compute_bounds, Bounds, DataError, Dataset};
use crate::logistic::{fit, FitOptions, LogisticError, LogisticModel, ModelFile};
use crate::oracle::{corner_optimum, CornerSolution, OracleError};
use crate::pso::{maximize, PsoError, SwarmConfig, SwarmResult};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Logistic(#[from] LogisticError),
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct PipelineConfig<T> {
    /// Swarm settings shared by every run. Its `seed` is ignored: run `i`
    /// uses `base_seed + i`.
    pub swarm: SwarmConfig<T>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub n_prescriptions: usize,
    /// Minimum normalized Chebyshev distance between prescriptions, and
    /// between a prescription and the corner optimum.
    pub distinctness_radius: T,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            n_runs: 25,
            base_seed: crate::DEFAULT_SEED,
            n_prescriptions: 2,
            distinctness_radius: T::lit(0.05),
            fit: FitOptions::default(),
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.swarm.validate()?;
        if self.n_runs < 1 {
            return Err(PipelineError::InvalidConfig("n_runs must be at least 1".into()));
        }
        if self.n_prescriptions > self.n_runs {
            return Err(PipelineError::InvalidConfig(format!(
                "n_prescriptions ({}) exceeds n_runs ({})",
                self.n_prescriptions, self.n_runs
            )));
        }
        if self.distinctness_radius.is_nan() || self.distinctness_radius < T::zero() {
            return Err(PipelineError::InvalidConfig(
                "distinctness_radius must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.base_seed;
        (0..self.n_runs as u64).map(move |i| base.wrapping_add(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EnsembleRun<T> {
    pub seed: u64,
    #[serde(flatten)]
    pub result: SwarmResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prescription<T> {
    pub position: Vec<T>,
    pub reliability: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PrescriptionReport<T> {
    pub model: ModelFile<T>,
    pub bounds: Bounds<T>,
    pub corner: CornerSolution<T>,
    pub ensemble: Vec<EnsembleRun<T>>,
    pub prescriptions: Vec<Prescription<T>>,
    pub warnings: Vec<String>,
    pub config: PipelineConfig<T>,
}

/// Score one bank: the fitted reliability at its ratios.
pub fn reliability_of_bank<T: Scalar>(model: &LogisticModel<T>, x: &[T]) -> Result<T> {
    Ok(model.reliability(x)?)
}

/// `n_runs` independent maximizations of the model's reliability, returned in
/// seed order whatever order they finish in.
pub fn run_ensemble<T: Scalar>(
    model: &LogisticModel<T>,
    bounds: &Bounds<T>,
    config: &PipelineConfig<T>,
) -> Result<Vec<EnsembleRun<T>>> {
    if model.n_features() != bounds.dim() {
        return Err(OracleError::DimensionMismatch {
            expected: model.n_features(),
            found: bounds.dim(),
        }
        .into());
    }
    let objective = |x: &[T]| model.reliability(x).expect("dimension checked above");
    let seeds: Vec<u64> = config.seeds().collect();
    let mut runs = seeds
        .par_iter()
        .map(|&seed| {
            maximize(objective, bounds, &config.swarm.with_seed(seed)).map(|result| EnsembleRun { seed, result })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(runs)
}

/// Greedy pick of up to `k` ensemble bests, best first, keeping only
/// solutions farther than `radius` (normalized Chebyshev distance) from the
/// corner and from every solution already kept. Ties in reliability keep
/// ensemble order.
pub fn select_prescriptions<T: Scalar>(
    ensemble: &[EnsembleRun<T>],
    corner: &CornerSolution<T>,
    bounds: &Bounds<T>,
    k: usize,
    radius: T,
) -> Vec<Prescription<T>> {
    let mut order: Vec<&EnsembleRun<T>> = ensemble.iter().collect();
    order.sort_by(|a, b| {
        b.result
            .best_value
            .partial_cmp(&a.result.best_value)
            .expect("finite values")
    });

    let mut picked: Vec<Prescription<T>> = Vec::with_capacity(k);
    for run in order {
        if picked.len() == k {
            break;
        }
        let x = &run.result.best_position;
        let distinct = |other: &[T]| bounds.normalized_distance(x, other) > radius;
        if distinct(&corner.position) && picked.iter().all(|p| distinct(&p.position)) {
            picked.push(Prescription {
                position: x.clone(),
                reliability: run.result.best_value,
            });
        }
    }
    picked
}

/// Second stage on a fixed model: corner optimum, PSO ensemble and
/// prescriptions.
pub fn optimize<T: Scalar>(
    model: &LogisticModel<T>,
    bounds: &Bounds<T>,
    config: &PipelineConfig<T>,
) -> Result<PrescriptionReport<T>> {
    config.validate()?;
    let corner = corner_optimum(model, bounds)?;
    let ensemble = run_ensemble(model, bounds, config)?;
    let mut prescriptions = select_prescriptions(
        &ensemble,
        &corner,
        bounds,
        config.n_prescriptions,
        config.distinctness_radius,
    );
    for p in &mut prescriptions {
        p.reliability = model.reliability(&p.position)?;
    }

    let mut warnings = Vec::new();
    if prescriptions.len() < config.n_prescriptions {
        warnings.push(format!(
            "PrescriptionShortfall: found {} of {} distinct near-optimal solutions",
            prescriptions.len(),
            config.n_prescriptions
        ));
    }
    Ok(PrescriptionReport {
        model: ModelFile::new(model, None),
        bounds: bounds.clone(),
        corner,
        ensemble,
        prescriptions,
        warnings,
        config: config.clone(),
    })
}

/// Both stages end to end: fit on the entire dataset, bound the search by
/// the data's column ranges, optimize.
pub fn run_pipeline<T: Scalar>(d: &Dataset<T>, config: &PipelineConfig<T>) -> Result<PrescriptionReport<T>> {
    config.validate()?;
    let (model, fit_report) = fit(d, &config.fit)?;
    let bounds = compute_bounds(d)?;
    let converged = fit_report.converged;
    let mut report = optimize(&model, &bounds, config)?;
    report.model.fit = Some(fit_report);
    if !converged {
        report.warnings.insert(
            0,
            "logistic fit did not converge; the data may be separable and coefficients are not a finite MLE".into(),
        );
    }
    Ok(report)
}

fn fmt_vector<T: Scalar>(x: &[T]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{:.3}", v.as_f64())).collect();
    format!("[{}]", parts.join(", "))
}

impl<T: Scalar> PrescriptionReport<T> {
    /// Largest best value across the ensemble.
    pub fn max_ensemble_reliability(&self) -> Option<T> {
        self.ensemble.iter().map(|r| r.result.best_value).reduce(T::max)
    }

    /// Plain-text table in the layout of a results table: one row per
    /// prescription with ratios and reliability at three decimals, budget
    /// settings echoed on the first row.
    pub fn render_table(&self) -> String {
        let headers = [
            "Financial ratios",
            "Maximum Iterations",
            "Population size",
            "Next best solutions",
            "Corresponding Reliability",
        ];
        let n = self.bounds.dim().to_string();
        let iters = self.config.swarm.max_iterations.to_string();
        let pop = self.config.swarm.population_size.to_string();
        let mut rows: Vec<[String; 5]> = self
            .prescriptions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let lead = |s: &String| if i == 0 { s.clone() } else { String::new() };
                [
                    lead(&n),
                    lead(&iters),
                    lead(&pop),
                    fmt_vector(&p.position),
                    format!("{:.3}", p.reliability.as_f64()),
                ]
            })
            .collect();
        if rows.is_empty() {
            rows.push([n, iters, pop, "(none)".into(), "-".into()]);
        }

        let mut widths = headers.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[&str]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        writeln!(out, "{}", line(&headers)).unwrap();
        for row in &rows {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            writeln!(out, "{}", line(&cells)).unwrap();
        }
        writeln!(out).unwrap();
        writeln!(
            out,
            "Global optimum (corner): {}  reliability {:.3}",
            fmt_vector(&self.corner.position),
            self.corner.value.as_f64()
        )
        .unwrap();
        if let Some(best) = self.max_ensemble_reliability() {
            let last = self.ensemble.last().map_or(0, |r| r.seed);
            writeln!(
                out,
                "Ensemble: {} runs (seeds {}..={}), best reliability {:.3}",
                self.ensemble.len(),
                self.ensemble.first().map_or(0, |r| r.seed),
                last,
                best.as_f64()
            )
            .unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }
}
