//! Central-difference gradient verification.

use super::tensor::Tensor2;

/// Finite-difference step.
pub const STEP: f64 = 1e-4;

/// Gradient magnitudes below this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, element index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` gradients against central differences of `loss`
/// around `params`. `loss` must be deterministic.
pub fn grad_check<F>(params: &[Tensor2], analytic: &[Tensor2], mut loss: F) -> GradCheckReport
where
    F: FnMut(&[Tensor2]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one gradient per parameter");
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.shape(), params[pi].shape(), "gradient shape for parameter {pi}");
        for k in 0..grad.len() {
            let orig = work[pi].as_slice()[k];
            work[pi].as_mut_slice()[k] = orig + STEP;
            let plus = loss(&work);
            work[pi].as_mut_slice()[k] = orig - STEP;
            let minus = loss(&work);
            work[pi].as_mut_slice()[k] = orig;

            let numeric = (plus - minus) / (2.0 * STEP);
            let a = grad.as_slice()[k];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, k);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}
