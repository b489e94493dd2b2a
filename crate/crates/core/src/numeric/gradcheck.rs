use serde::Serialize;

use crate::numeric::Matrix;

/// Denominator floor for relative errors; keeps all-zero gradients from
/// dividing by zero.
pub const ABS_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, ABS_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub param: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Flat index of the worst entry.
    pub worst_entry: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    /// Entries whose relative error reached the tolerance.
    pub failing_entries: usize,
    /// Largest `|analytic - numeric|` among those entries.
    pub max_failing_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
    pub step: f64,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() < self.tolerance
    }

    /// Largest absolute discrepancy among entries that fail the relative test.
    pub fn max_failing_abs_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_failing_abs_error).fold(0.0, f64::max)
    }

    /// Passes if every entry either meets the relative tolerance or differs
    /// by at most `abs_tol`. Central differences cannot resolve gradients
    /// below roughly `ulp(f) / h`, so tiny entries need an absolute test.
    pub fn passed_within(&self, abs_tol: f64) -> bool {
        self.max_failing_abs_error() <= abs_tol
    }
}

/// Compares `analytic` gradients of `f` at `params` against central
/// differences with step `h`, entry by entry.
pub fn finite_difference_check<F>(mut f: F, params: &[Matrix], analytic: &[Matrix], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[Matrix]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(params.len(), analytic.len(), "one gradient per parameter");
    let mut work: Vec<Matrix> = params.to_vec();
    let mut checks = Vec::with_capacity(params.len());

    for (p, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.shape(), params[p].shape(), "gradient shape for param {p}");
        let mut check = ParamCheck {
            param: p,
            max_relative_error: 0.0,
            max_absolute_error: 0.0,
            worst_entry: 0,
            analytic_at_worst: 0.0,
            numeric_at_worst: 0.0,
            failing_entries: 0,
            max_failing_abs_error: 0.0,
        };
        for idx in 0..params[p].len() {
            let original = params[p].data()[idx];
            work[p].data_mut()[idx] = original + h;
            let plus = f(&work);
            work[p].data_mut()[idx] = original - h;
            let minus = f(&work);
            work[p].data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[idx];
            let rel = relative_error(a, numeric);
            let abs = (a - numeric).abs();
            check.max_absolute_error = check.max_absolute_error.max(abs);
            if rel >= tol {
                check.failing_entries += 1;
                check.max_failing_abs_error = check.max_failing_abs_error.max(abs);
            }
            if rel > check.max_relative_error || idx == 0 {
                check.max_relative_error = check.max_relative_error.max(rel);
                check.worst_entry = idx;
                check.analytic_at_worst = a;
                check.numeric_at_worst = numeric;
            }
        }
        checks.push(check);
    }

    GradCheckReport { params: checks, tolerance: tol, step: h }
}
