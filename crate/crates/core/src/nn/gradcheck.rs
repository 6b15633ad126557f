//! Finite-difference gradient verification.
//!
//! Central differences with h = 1e-4 on f64 give ~1e-9 truncation error for
//! the smooth functions checked here, far below the 1e-4 pass threshold.

/// Step size used by the crate's gradient checks.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Maximum elementwise error between `analytic` and the central-difference
/// gradient of `f` at `x`. The error is relative for large gradients and
/// absolute below magnitude 1: `|a - n| / max(1, |a|, |n|)`.
pub fn max_rel_error<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
        if err > worst {
            worst = err;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_matches() {
        let f = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let x = vec![1.0, -2.0, 0.5];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(max_rel_error(f, &x, &analytic, DEFAULT_STEP) < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let f = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let x = vec![1.0, 2.0];
        let wrong = vec![2.0, 3.0]; // second entry should be 4
        assert!(max_rel_error(f, &x, &wrong, DEFAULT_STEP) > 0.1);
    }
}
