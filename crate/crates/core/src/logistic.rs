//! Logistic-regression reliability model.
//!
//! The reliability of a bank with ratios `x` is `sigmoid(beta0 + sum beta_i x_i)`.
//! Coefficients are estimated by Newton-Raphson on the Bernoulli
//! log-likelihood, starting from `beta = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum LogisticError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("single-class dataset: both healthy (1) and bankrupt (0) rows are required")]
    SingleClassDataset,
    #[error("singular Hessian at iteration {iteration}")]
    SingularHessian { iteration: usize },
    #[error("non-finite coefficients at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
}

pub type Result<T, E = LogisticError> = std::result::Result<T, E>;

/// Ridge added to the Newton system when the Hessian is numerically singular.
pub const FALLBACK_RIDGE: f64 = 1e-8;

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^t)` without overflow.
pub fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// Fitted coefficients: `beta[0]` is the intercept, `beta[i]` multiplies
/// feature `i - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticModel<T> {
    feature_names: Vec<String>,
    beta: Vec<T>,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn new(beta: Vec<T>, feature_names: Vec<String>) -> Result<Self> {
        if beta.len() != feature_names.len() + 1 {
            return Err(LogisticError::InvalidModel(format!(
                "{} coefficients for {} features",
                beta.len(),
                feature_names.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(LogisticError::InvalidModel("coefficients must be finite".into()));
        }
        Ok(Self { feature_names, beta })
    }

    /// Model with generated feature names `x1..xn`.
    pub fn from_beta(beta: Vec<T>) -> Result<Self> {
        let n = beta.len().saturating_sub(1);
        Self::new(beta, (1..=n).map(|i| format!("x{i}")).collect())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn intercept(&self) -> T {
        self.beta[0]
    }

    pub fn coefficients(&self) -> &[T] {
        &self.beta[1..]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Linear score `beta0 + sum beta_i x_i`, accumulated left to right.
    pub fn score(&self, x: &[T]) -> Result<T> {
        self.check_dim(x.len())?;
        Ok(linear_score(&self.beta, x))
    }

    /// Probability of being healthy. Saturated values are kept strictly
    /// inside `(0, 1)`.
    pub fn reliability(&self, x: &[T]) -> Result<T> {
        let p = sigmoid(self.score(x)?);
        let top = T::one() - T::epsilon() / T::lit(2.0);
        Ok(p.max(T::min_positive_value()).min(top))
    }

    /// Bernoulli log-likelihood, evaluated as `sum y t - softplus(t)`.
    pub fn log_likelihood(&self, d: &Dataset<T>) -> Result<T> {
        self.check_dim(d.n_features())?;
        Ok(log_likelihood_at(&self.beta, d))
    }

    /// `X^T (y - p)` with `X` carrying a leading column of ones.
    pub fn gradient(&self, d: &Dataset<T>) -> Result<Vec<T>> {
        self.check_dim(d.n_features())?;
        Ok(gradient_at(&self.beta, d))
    }

    /// `-X^T W X` with `W = diag(p (1 - p))`, as a row-major `(n+1)^2` matrix.
    pub fn hessian(&self, d: &Dataset<T>) -> Result<Vec<Vec<T>>> {
        self.check_dim(d.n_features())?;
        let k = self.beta.len();
        let flat = neg_hessian_at(&self.beta, d);
        Ok((0..k).map(|i| (0..k).map(|j| -flat[i * k + j]).collect()).collect())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.n_features() {
            Ok(())
        } else {
            Err(LogisticError::DimensionMismatch {
                expected: self.n_features(),
                found,
            })
        }
    }
}

fn linear_score<T: Scalar>(beta: &[T], x: &[T]) -> T {
    x.iter().zip(&beta[1..]).fold(beta[0], |acc, (&xi, &bi)| acc + bi * xi)
}

fn log_likelihood_at<T: Scalar>(beta: &[T], d: &Dataset<T>) -> T {
    d.features().iter().zip(d.labels()).fold(T::zero(), |acc, (x, &y)| {
        let t = linear_score(beta, x);
        let yt = if y == 1 { t } else { T::zero() };
        acc + (yt - softplus(t))
    })
}

/// `y - p`, computed as `sigmoid(-t)` for healthy rows so it does not cancel.
fn residual<T: Scalar>(t: T, y: u8) -> T {
    if y == 1 {
        sigmoid(-t)
    } else {
        -sigmoid(t)
    }
}

fn gradient_at<T: Scalar>(beta: &[T], d: &Dataset<T>) -> Vec<T> {
    let mut g = vec![T::zero(); beta.len()];
    for (x, &y) in d.features().iter().zip(d.labels()) {
        let r = residual(linear_score(beta, x), y);
        g[0] = g[0] + r;
        for (gj, &xj) in g[1..].iter_mut().zip(x) {
            *gj = *gj + r * xj;
        }
    }
    g
}

/// `X^T W X`, flat row-major.
fn neg_hessian_at<T: Scalar>(beta: &[T], d: &Dataset<T>) -> Vec<T> {
    let k = beta.len();
    let mut h = vec![T::zero(); k * k];
    let mut xa = vec![T::one(); k];
    for x in d.features() {
        let t = linear_score(beta, x);
        let w = sigmoid(t) * sigmoid(-t);
        xa[1..].copy_from_slice(x);
        for i in 0..k {
            let wi = w * xa[i];
            for j in 0..=i {
                h[i * k + j] = h[i * k + j] + wi * xa[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            h[j * k + i] = h[i * k + j];
        }
    }
    h
}

/// Solve `A z = b` for symmetric positive-definite `A` (flat row-major) by
/// Cholesky. Returns `None` when a pivot is not safely positive.
pub(crate) fn cholesky_solve<T: Scalar>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let k = b.len();
    let max_diag = (0..k).map(|i| a[i * k + i].abs()).fold(T::zero(), T::max);
    let floor = T::epsilon() * T::from_usize_lossy(k) * max_diag;
    let mut l = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s = s - l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= floor || !s.is_finite() {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..k {
        for p in 0..i {
            z[i] = z[i] - l[i * k + p] * z[p];
        }
        z[i] = z[i] / l[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            z[i] = z[i] - l[p * k + i] * z[p];
        }
        z[i] = z[i] / l[i * k + i];
    }
    Some(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct FitOptions<T> {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute gradient component.
    pub grad_tol: T,
    /// Convergence also requires the Newton step to be this small relative
    /// to `1 + max |beta|`. Separated data keeps taking unit-sized steps
    /// while its gradient vanishes, so this is what reports it as unconverged.
    pub step_tol: T,
    /// L2 penalty `ridge / 2 * |beta|^2`, intercept included.
    pub ridge: T,
    /// Retry with [`FALLBACK_RIDGE`] when the Hessian is singular instead of
    /// failing with [`LogisticError::SingularHessian`].
    pub ridge_fallback: bool,
    /// Halve a Newton step until the objective does not decrease.
    pub step_halving: bool,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: T::lit(1e-8),
            step_tol: T::lit(1e-6),
            ridge: T::zero(),
            ridge_fallback: true,
            step_halving: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitReport<T> {
    pub converged: bool,
    pub iterations: usize,
    pub final_log_likelihood: T,
    pub max_abs_gradient: T,
    pub ridge_used: T,
    /// Penalized log-likelihood after each accepted iterate, starting at
    /// `beta = 0`.
    #[serde(default)]
    pub log_likelihood_trace: Vec<T>,
}

fn ridged_solve<T: Scalar>(neg_h: &[T], grad: &[T], ridge: T) -> Option<Vec<T>> {
    let k = grad.len();
    let mut a = neg_h.to_vec();
    for i in 0..k {
        a[i * k + i] = a[i * k + i] + ridge;
    }
    cholesky_solve(&a, grad)
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Maximum-likelihood fit by Newton-Raphson from `beta = 0`.
pub fn fit<T: Scalar>(d: &Dataset<T>, options: &FitOptions<T>) -> Result<(LogisticModel<T>, FitReport<T>)> {
    if !(options.grad_tol >= T::zero() && options.step_tol >= T::zero() && options.ridge >= T::zero()) {
        return Err(LogisticError::InvalidOptions(
            "tolerances and ridge must be non-negative".into(),
        ));
    }
    let healthy = d.n_healthy();
    if healthy == 0 || healthy == d.n_rows() {
        return Err(LogisticError::SingleClassDataset);
    }

    let k = d.n_features() + 1;
    let mut ridge = options.ridge;
    let half = T::lit(0.5);
    let objective = |beta: &[T], ridge: T| {
        let penalty = beta.iter().fold(T::zero(), |s, &b| s + b * b);
        log_likelihood_at(beta, d) - half * ridge * penalty
    };

    let mut beta = vec![T::zero(); k];
    let mut current = objective(&beta, ridge);
    let mut trace = vec![current];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let mut grad = gradient_at(&beta, d);
        for (g, &b) in grad.iter_mut().zip(&beta) {
            *g = *g - ridge * b;
        }

        let neg_h = neg_hessian_at(&beta, d);
        let step = match ridged_solve(&neg_h, &grad, ridge) {
            Some(step) => step,
            None if options.ridge_fallback && ridge < T::lit(FALLBACK_RIDGE) => {
                // the ridge stays on for the rest of the fit
                let bumped = T::lit(FALLBACK_RIDGE);
                for (g, &b) in grad.iter_mut().zip(&beta) {
                    *g = *g - (bumped - ridge) * b;
                }
                ridge = bumped;
                current = objective(&beta, ridge);
                ridged_solve(&neg_h, &grad, ridge).ok_or(LogisticError::SingularHessian { iteration: iterations })?
            }
            None => return Err(LogisticError::SingularHessian { iteration: iterations }),
        };
        let grad_norm = max_abs(&grad);

        let step_size = max_abs(&step) / (T::one() + max_abs(&beta));
        if grad_norm <= options.grad_tol && step_size <= options.step_tol {
            converged = true;
            // one last step costs nothing and squares the remaining error
            let polished: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + s).collect();
            let mut polished_grad = gradient_at(&polished, d);
            for (g, &b) in polished_grad.iter_mut().zip(&polished) {
                *g = *g - ridge * b;
            }
            if polished.iter().all(|b| b.is_finite()) && max_abs(&polished_grad) <= grad_norm {
                beta = polished;
            }
            break;
        }
        if iterations >= options.max_iter {
            break;
        }

        // differences this small are rounding noise, not descent
        let slack = T::lit(1024.0) * T::epsilon() * (T::one() + current.abs());
        let mut scale = T::one();
        let mut candidate: Vec<T>;
        let mut value;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            value = objective(&candidate, ridge);
            if !options.step_halving || value >= current - slack || halvings >= 50 {
                break;
            }
            scale = scale * half;
            halvings += 1;
        }
        iterations += 1;
        if candidate.iter().any(|b| !b.is_finite()) || !value.is_finite() {
            return Err(LogisticError::NonFiniteIterate { iteration: iterations });
        }
        if options.step_halving && value < current - slack {
            // no descent direction left at working precision
            break;
        }
        beta = candidate;
        current = value;
        trace.push(current);
    }

    let mut grad = gradient_at(&beta, d);
    for (g, &b) in grad.iter_mut().zip(&beta) {
        *g = *g - ridge * b;
    }
    let report = FitReport {
        converged,
        iterations,
        final_log_likelihood: log_likelihood_at(&beta, d),
        max_abs_gradient: max_abs(&grad),
        ridge_used: ridge,
        log_likelihood_trace: trace,
    };
    let model = LogisticModel::new(beta, d.feature_names().to_vec())?;
    Ok((model, report))
}

/// On-disk model: coefficients plus the report of the fit that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ModelFile<T> {
    pub feature_names: Vec<String>,
    pub beta: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport<T>>,
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(model: &LogisticModel<T>, fit: Option<FitReport<T>>) -> Self {
        Self {
            feature_names: model.feature_names().to_vec(),
            beta: model.beta().to_vec(),
            fit,
        }
    }

    pub fn model(&self) -> Result<LogisticModel<T>> {
        LogisticModel::new(self.beta.clone(), self.feature_names.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Bounds};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dataset(rows: &[(&[f64], u8)]) -> Dataset<f64> {
        let n = rows[0].0.len();
        Dataset::new(
            rows.iter().map(|(x, _)| x.to_vec()).collect(),
            rows.iter().map(|(_, y)| *y).collect(),
            (1..=n).map(|i| format!("x{i}")).collect(),
        )
        .unwrap()
    }

    pub(crate) fn symmetric_six() -> Dataset<f64> {
        dataset(&[
            (&[-1.0], 0),
            (&[-1.0], 0),
            (&[-1.0], 1),
            (&[1.0], 0),
            (&[1.0], 1),
            (&[1.0], 1),
        ])
    }

    #[test]
    fn reliability_examples() {
        let m = LogisticModel::from_beta(vec![0.0; 4]).unwrap();
        assert_eq!(m.reliability(&[3.0, -2.0, 100.0]).unwrap(), 0.5);
        let m = LogisticModel::from_beta(vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(m.reliability(&[3f64.ln()]).unwrap(), 0.75, epsilon = 1e-15);
        let m = LogisticModel::from_beta(vec![2.0, -1.0]).unwrap();
        assert_eq!(m.reliability(&[2.0]).unwrap(), 0.5);
        assert_eq!(
            m.reliability(&[1.0, 2.0]),
            Err(LogisticError::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn reliability_stays_open_interval_at_extremes() {
        let m = LogisticModel::from_beta(vec![0.0, 1.0]).unwrap();
        for t in [-1e4, -800.0, -700.0, -40.0, 40.0, 700.0, 800.0, 1e4] {
            let p = m.reliability(&[t]).unwrap();
            assert!(p > 0.0 && p < 1.0, "t={t} p={p}");
        }
        assert!(sigmoid(-700.0f64) > 0.0);
        assert!(sigmoid(700.0f64).is_finite());
    }

    #[test]
    fn log_likelihood_examples() {
        let d = symmetric_six();
        let zero = LogisticModel::from_beta(vec![0.0, 0.0]).unwrap();
        assert_relative_eq!(
            zero.log_likelihood(&d).unwrap(),
            6.0 * 0.5f64.ln(),
            max_relative = 1e-15
        );

        let one = dataset(&[(&[3f64.ln()], 1), (&[0.0], 0)]);
        let m = LogisticModel::from_beta(vec![0.0, 1.0]).unwrap();
        // second row contributes ln(1 - 0.5)
        assert_relative_eq!(
            m.log_likelihood(&one).unwrap(),
            0.75f64.ln() + 0.5f64.ln(),
            max_relative = 1e-15
        );

        let m = LogisticModel::from_beta(vec![0.3, -1.2]).unwrap();
        let doubled = d.concat(&d).unwrap();
        assert_relative_eq!(
            m.log_likelihood(&doubled).unwrap(),
            2.0 * m.log_likelihood(&d).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn log_likelihood_stable_for_huge_scores() {
        let d = dataset(&[(&[1000.0], 0), (&[-1000.0], 1)]);
        let m = LogisticModel::from_beta(vec![0.0, 1.0]).unwrap();
        let ll = m.log_likelihood(&d).unwrap();
        assert_relative_eq!(ll, -2000.0, max_relative = 1e-12);
    }

    #[test]
    fn gradient_and_hessian_examples() {
        let d = symmetric_six();
        let zero = LogisticModel::from_beta(vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.gradient(&d).unwrap()[0], 0.0);

        let two = dataset(&[(&[1.0], 0), (&[-1.0], 1)]);
        let h = zero.hessian(&two).unwrap();
        // X = [[1, 1], [1, -1]], X^T X = 2 I
        assert_eq!(h, vec![vec![-0.5, 0.0], vec![0.0, -0.5]]);
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let z = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert_relative_eq!(z[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(z[1], 0.0, epsilon = 1e-15);
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn fit_symmetric_six_has_zero_intercept() {
        let (m, report) = fit(&symmetric_six(), &FitOptions::default()).unwrap();
        assert!(report.converged);
        assert!(m.intercept().abs() <= 1e-8);
        // closed form: p(x=1) = 2/3, so beta1 = ln 2
        assert_relative_eq!(m.coefficients()[0], 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn separable_data_reports_non_convergence() {
        let d = dataset(&[(&[-1.0], 0), (&[1.0], 1)]);
        let (m, report) = fit(&d, &FitOptions::default()).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 100);
        assert!(m.beta().iter().all(|b| b.is_finite()));
        assert!(m.coefficients()[0] > 10.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = dataset(&[(&[-1.0], 1), (&[1.0], 1)]);
        assert_eq!(
            fit(&d, &FitOptions::default()).unwrap_err(),
            LogisticError::SingleClassDataset
        );
    }

    #[test]
    fn collinear_columns_trigger_ridge_fallback() {
        let rows: Vec<(Vec<f64>, u8)> = (0..20)
            .map(|i| {
                let x = i as f64 / 10.0;
                (vec![x, 2.0 * x], u8::from(i % 3 != 0))
            })
            .collect();
        let d = Dataset::new(
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter().map(|r| r.1).collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let (m, report) = fit(&d, &FitOptions::default()).unwrap();
        assert_eq!(report.ridge_used, FALLBACK_RIDGE);
        assert!(m.beta().iter().all(|b| b.is_finite()));

        let strict = FitOptions {
            ridge_fallback: false,
            ..FitOptions::default()
        };
        assert!(matches!(fit(&d, &strict), Err(LogisticError::SingularHessian { .. })));
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let m = LogisticModel::new(vec![0.1, -1.0 / 3.0, 2e-300], vec!["a".into(), "b".into()]).unwrap();
        let file = ModelFile::new(&m, None);
        let s = crate::json::to_string(&file).unwrap();
        let back: ModelFile<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.model().unwrap(), m);
        assert!(serde_json::from_str::<ModelFile<f64>>(r#"{"feature_names":[],"beta":[0.0],"extra":1}"#).is_err());
    }

    #[test]
    fn fits_in_single_precision() {
        let ranges = Bounds::<f32>::uniform(2, -1.0, 1.0).unwrap();
        let (d, _) = generate_synthetic(2, 2000, &[0.5f32, 1.5, -1.0], &ranges, 3).unwrap();
        let opts = FitOptions {
            grad_tol: 1e-2,
            step_tol: 1e-3,
            ..FitOptions::default()
        };
        let (m, report) = fit(&d, &opts).unwrap();
        assert!(report.converged, "{report:?}");
        assert!((m.beta()[1] - 1.5).abs() < 0.4);
    }

    proptest! {
        #[test]
        fn sigmoid_is_monotone_and_symmetric(a in -30.0..30.0f64, b in -30.0..30.0f64) {
            prop_assume!(a < b);
            prop_assert!(sigmoid(a) < sigmoid(b));
            prop_assert!((sigmoid(-a) - (1.0 - sigmoid(a))).abs() <= 1e-15);
        }

        #[test]
        fn fit_is_invariant_to_row_order(seed in 0u64..1000) {
            let ranges = Bounds::uniform(2, -2.0, 2.0).unwrap();
            let (d, _) = generate_synthetic(2, 60, &[0.2, 0.7, -0.4], &ranges, seed).unwrap();
            prop_assume!(d.n_healthy() > 0 && d.n_healthy() < d.n_rows());
            let mut order: Vec<usize> = (0..d.n_rows()).rev().collect();
            order.rotate_left((seed % 60) as usize);
            let (a, ra) = fit(&d, &FitOptions::default()).unwrap();
            let (b, _) = fit(&d.select_rows(&order), &FitOptions::default()).unwrap();
            prop_assume!(ra.converged);
            for (x, y) in a.beta().iter().zip(b.beta()) {
                let (x, y): (f64, f64) = (*x, *y);
                prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
            }
        }
    }
}
