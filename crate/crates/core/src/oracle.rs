//! Exact optima of a logistic reliability over a box.
//!
//! The sigmoid is strictly increasing, so maximizing it over a box is the
//! same as maximizing the linear score, and that is attained at the vertex
//! picked by coefficient signs. [`enumerate_corners`] checks the same thing
//! by brute force over all `2^n` vertices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Bounds;
use crate::logistic::{LogisticError, LogisticModel};
use crate::Scalar;

/// Coefficients with magnitude below this are treated as exactly zero.
pub const ZERO_COEFFICIENT: f64 = 1e-15;

/// Largest dimension [`enumerate_corners`] accepts.
pub const MAX_ENUMERATION_DIM: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: model has {expected} features, bounds have {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("corner enumeration over {0} dimensions exceeds the limit of {MAX_ENUMERATION_DIM}")]
    DimensionTooLarge(usize),
    #[error(transparent)]
    Model(#[from] LogisticError),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CornerSolution<T> {
    pub position: Vec<T>,
    pub value: T,
    /// `+1` at the upper bound, `-1` at the lower bound, `0` where the
    /// coefficient is zero and the ratio does not affect reliability (pinned
    /// to the lower bound).
    pub active_signs: Vec<i8>,
}

fn check_dims<T: Scalar>(model: &LogisticModel<T>, bounds: &Bounds<T>) -> Result<()> {
    if model.n_features() == bounds.dim() {
        Ok(())
    } else {
        Err(OracleError::DimensionMismatch {
            expected: model.n_features(),
            found: bounds.dim(),
        })
    }
}

/// Global maximum of `model.reliability` over `bounds` by the sign rule.
pub fn corner_optimum<T: Scalar>(model: &LogisticModel<T>, bounds: &Bounds<T>) -> Result<CornerSolution<T>> {
    check_dims(model, bounds)?;
    let zero = T::lit(ZERO_COEFFICIENT);
    let (position, active_signs): (Vec<T>, Vec<i8>) = model
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b.abs() < zero {
                (bounds.lower()[i], 0)
            } else if b > T::zero() {
                (bounds.upper()[i], 1)
            } else {
                (bounds.lower()[i], -1)
            }
        })
        .unzip();
    let value = model.reliability(&position)?;
    Ok(CornerSolution {
        position,
        value,
        active_signs,
    })
}

/// Best vertex by exhaustive search. Ties go to the lexicographically
/// smallest sign vector, with `-1 < +1`.
pub fn enumerate_corners<T: Scalar>(model: &LogisticModel<T>, bounds: &Bounds<T>) -> Result<CornerSolution<T>> {
    check_dims(model, bounds)?;
    let n = bounds.dim();
    if n > MAX_ENUMERATION_DIM {
        return Err(OracleError::DimensionTooLarge(n));
    }
    let mut best: Option<CornerSolution<T>> = None;
    let mut position = bounds.lower().to_vec();
    // dimension 0 is the most significant bit, so masks ascend in
    // lexicographic order of the sign vector
    for mask in 0u32..(1u32 << n) {
        for (i, slot) in position.iter_mut().enumerate() {
            let up = mask >> (n - 1 - i) & 1 == 1;
            *slot = if up { bounds.upper()[i] } else { bounds.lower()[i] };
        }
        let value = model.reliability(&position)?;
        if best.as_ref().is_none_or(|b| value > b.value) {
            let active_signs = (0..n)
                .map(|i| if mask >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
                .collect();
            best = Some(CornerSolution {
                position: position.clone(),
                value,
                active_signs,
            });
        }
    }
    Ok(best.expect("at least one corner"))
}
