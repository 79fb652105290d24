//! Weighted-rule fitting: ordinary least squares on the six rule scores
//! via the normal equations, with a small ridge term for stability.

use serde::{Deserialize, Serialize};

use super::{EstimatorError, TrainRecord};
use crate::textfeat::{FeatureVector, FEATURE_COUNT};

const RIDGE: f64 = 1e-8;
const CONDITION_LIMIT: f64 = 1e12;
/// Intercept column plus the six rule-score columns.
const COLS: usize = FEATURE_COUNT + 1;

/// A fitted linear model over the six rule scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRule {
    pub coefficients: [f64; FEATURE_COUNT],
    pub intercept: f64,
}

impl WeightedRule {
    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(features.scores())
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    pub fn residual_sum_of_squares(&self, records: &[TrainRecord]) -> f64 {
        records
            .iter()
            .map(|r| {
                let e = self.predict(&r.features) - r.target_len as f64;
                e * e
            })
            .sum()
    }
}

/// Fits output length as an affine function of the six rule scores.
///
/// Solves the ridge-damped normal equations (X'X + 1e-8 I) w = X'y by
/// Gaussian elimination with partial pivoting. Feature columns that are
/// identically zero carry no information and get exactly-zero coefficients
/// from the ridge, so they are excluded from the conditioning estimate;
/// the pivot ratio of the remaining block above 1e12 signals a design the
/// solve cannot be trusted on.
pub fn fit_weighted_rule(records: &[TrainRecord]) -> Result<WeightedRule, EstimatorError> {
    if records.len() < COLS {
        return Err(EstimatorError::DegenerateDesign(format!(
            "need at least {COLS} records, got {}",
            records.len()
        )));
    }
    if records
        .iter()
        .all(|r| r.features.scores().iter().all(|&s| s == 0.0))
    {
        return Err(EstimatorError::DegenerateDesign(
            "feature matrix is identically zero".into(),
        ));
    }

    // Normal matrix and right-hand side; column 0 is the intercept.
    let mut a = [[0.0f64; COLS]; COLS];
    let mut b = [0.0f64; COLS];
    for record in records {
        let mut row = [0.0f64; COLS];
        row[0] = 1.0;
        row[1..].copy_from_slice(record.features.scores());
        let y = record.target_len as f64;
        for i in 0..COLS {
            b[i] += row[i] * y;
            for j in 0..COLS {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let informative: Vec<bool> = (0..COLS).map(|i| a[i][i] > 0.0).collect();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += RIDGE;
    }

    let solution = solve_with_condition_check(a, b, &informative)?;
    let mut coefficients = [0.0f64; FEATURE_COUNT];
    coefficients.copy_from_slice(&solution[1..]);
    Ok(WeightedRule {
        coefficients,
        intercept: solution[0],
    })
}

fn solve_with_condition_check(
    mut a: [[f64; COLS]; COLS],
    mut b: [f64; COLS],
    informative: &[bool],
) -> Result<[f64; COLS], EstimatorError> {
    let mut pivots = Vec::with_capacity(COLS);
    for col in 0..COLS {
        let pivot_row = (col..COLS)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col] == 0.0 {
            return Err(EstimatorError::DegenerateDesign(format!(
                "exact zero pivot in column {col}"
            )));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        if informative[col] {
            pivots.push(a[col][col].abs());
        }
        for row in col + 1..COLS {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..COLS {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let max_pivot = pivots.iter().cloned().fold(0.0f64, f64::max);
    let min_pivot = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = max_pivot / min_pivot;
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(EstimatorError::DegenerateDesign(format!(
            "condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )));
    }

    let mut x = [0.0f64; COLS];
    for col in (0..COLS).rev() {
        let mut acc = b[col];
        for k in col + 1..COLS {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}
