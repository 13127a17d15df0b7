//! Small numerical building blocks shared by the physics modules.

pub mod eigen;
pub mod fit;
pub mod quad;
pub mod rng;

/// Bracketed bisection for a sign change of `f` on `[lo, hi]`.
///
/// Returns `None` when `f(lo)` and `f(hi)` have the same sign. Iterates until
/// the bracket is narrower than `tol` or stops shrinking in floating point.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `n` evenly spaced samples from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Inclusive range with a fixed step; the endpoint is included when it lies on the grid
/// (to within a part in 1e9 of the step).
pub fn arange_inclusive(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "step must be positive");
    let n = ((stop - start) / step + 1e-9).floor();
    if n < 0.0 {
        return Vec::new();
    }
    (0..=n as usize).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_without_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn arange_includes_endpoint() {
        let v = arange_inclusive(-20.0, 20.0, 1.0);
        assert_eq!(v.len(), 41);
        assert_eq!(v[40], 20.0);
    }
}
