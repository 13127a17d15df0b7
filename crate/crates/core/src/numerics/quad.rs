//! Composite quadrature.

/// Composite Simpson rule on `[a, b]` with `intervals` subintervals (rounded up to even).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = simpson_intervals(intervals);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Nodes and weights of the composite Simpson rule, for integrands that are expensive to
/// evaluate pointwise and are better assembled by the caller.
pub fn simpson_nodes(a: f64, b: f64, intervals: usize) -> Vec<(f64, f64)> {
    let n = simpson_intervals(intervals);
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + h * i as f64, w * h / 3.0)
        })
        .collect()
}

fn simpson_intervals(n: usize) -> usize {
    let n = n.max(2);
    n + n % 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn nodes_sum_to_interval_length() {
        let s: f64 = simpson_nodes(1.0, 4.0, 201).iter().map(|(_, w)| w).sum();
        assert!((s - 3.0).abs() < 1e-13);
    }
}
