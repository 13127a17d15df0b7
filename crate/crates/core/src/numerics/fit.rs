//! Least-squares fits used by the profiling and coherence analyses.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_var: f64,
    pub slope_var: f64,
    pub covariance: f64,
}

impl LineFit {
    pub fn slope_err(&self) -> f64 {
        self.slope_var.sqrt()
    }

    pub fn intercept_err(&self) -> f64 {
        self.intercept_var.sqrt()
    }
}

/// Straight-line fit with weights `w_i = 1/sigma_i^2`. The covariance is the inverse of the
/// weighted normal matrix (absolute sigmas, no residual rescaling). Returns `None` when fewer
/// than two distinct abscissae carry weight.
pub fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    assert!(x.len() == y.len() && y.len() == w.len());
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        s += wi;
        sx += wi * xi;
        sy += wi * yi;
        sxx += wi * xi * xi;
        sxy += wi * xi * yi;
    }
    let det = s * sxx - sx * sx;
    if !(det > 0.0) || det < 1e-14 * s * sxx {
        return None;
    }
    Some(LineFit {
        intercept: (sxx * sy - sx * sxy) / det,
        slope: (s * sxy - sx * sy) / det,
        intercept_var: sxx / det,
        slope_var: s / det,
        covariance: -sx / det,
    })
}

/// Unweighted polynomial least squares; coefficients in ascending powers.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Option<Vec<f64>> {
    let n = x.len();
    if n <= degree {
        return None;
    }
    // centre and scale the abscissa for conditioning
    let mean = x.iter().sum::<f64>() / n as f64;
    let span = x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if span == 0.0 {
        return None;
    }
    let a = DMatrix::from_fn(n, degree + 1, |i, j| ((x[i] - mean) / span).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let scaled = svd.solve(&b, 1e-14).ok()?;
    // expand p(u) with u = (x - mean)/span back into powers of x
    let mut coeffs = vec![0.0; degree + 1];
    for (j, &cj) in scaled.iter().enumerate() {
        // (x - mean)^j / span^j = sum_k binom(j,k) x^k (-mean)^(j-k) / span^j
        let mut binom = 1.0;
        for k in 0..=j {
            coeffs[k] += cj * binom * (-mean).powi((j - k) as i32) / span.powi(j as i32);
            binom = binom * (j - k) as f64 / (k + 1) as f64;
        }
    }
    Some(coeffs)
}

/// Fitted Gaussian `amplitude * exp(-2 (x - center)^2 / radius^2)`; `radius` is the 1/e^2
/// intensity radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub radius: f64,
    pub rms_residual: f64,
}

impl GaussianFit {
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * (-2.0 * d * d / (self.radius * self.radius)).exp()
    }
}

fn gaussian_residuals(x: &[f64], y: &[f64], p: &Vector3<f64>) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let d = xi - p[1];
            let r = yi - p[0] * (-2.0 * d * d / (p[2] * p[2])).exp();
            r * r
        })
        .sum()
}

/// Levenberg-Marquardt fit of a 1D Gaussian profile. Starts from moment estimates.
pub fn gaussian_fit(x: &[f64], y: &[f64]) -> Option<GaussianFit> {
    if x.len() < 4 || x.len() != y.len() {
        return None;
    }
    let total: f64 = y.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = x.iter().zip(y).map(|(xi, yi)| xi * yi.max(0.0)).sum::<f64>() / total;
    let var = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (xi - mean).powi(2) * yi.max(0.0))
        .sum::<f64>()
        / total;
    let peak = y.iter().cloned().fold(f64::MIN, f64::max);
    let mut p = Vector3::new(peak, mean, (2.0 * var.sqrt()).max(1e-300));
    let mut cost = gaussian_residuals(x, y, &p);
    let mut lambda = 1e-3;

    for _ in 0..500 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let d = xi - p[1];
            let w2 = p[2] * p[2];
            let e = (-2.0 * d * d / w2).exp();
            let model = p[0] * e;
            let j = Vector3::new(e, model * 4.0 * d / w2, model * 4.0 * d * d / (w2 * p[2]));
            jtj += j * j.transpose();
            jtr += j * (yi - model);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if trial[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let c = gaussian_residuals(x, y, &trial);
            if c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(GaussianFit {
        amplitude: p[0],
        center: p[1],
        radius: p[2].abs(),
        rms_residual: (cost / x.len() as f64).sqrt(),
    })
}

/// Fringe fit `y = offset + a cos(phi) + b sin(phi)` with per-point variances.
#[derive(Debug, Clone, Copy)]
pub struct SinusoidFit {
    pub offset: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
    /// Covariance of (offset, cos_amp, sin_amp).
    pub covariance: Matrix3<f64>,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_amp.hypot(self.sin_amp)
    }

    /// Standard error of `amplitude()` by linear error propagation.
    pub fn amplitude_err(&self) -> f64 {
        let a = self.amplitude();
        if a == 0.0 {
            return (0.5 * (self.covariance[(1, 1)] + self.covariance[(2, 2)])).sqrt();
        }
        let g = Vector3::new(0.0, self.cos_amp / a, self.sin_amp / a);
        (g.transpose() * self.covariance * g)[(0, 0)].max(0.0).sqrt()
    }
}

pub fn sinusoid_fit(phases: &[f64], y: &[f64], variances: &[f64]) -> Option<SinusoidFit> {
    if phases.len() < 3 {
        return None;
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for ((&ph, &yi), &vi) in phases.iter().zip(y).zip(variances) {
        let w = 1.0 / vi;
        let row = Vector3::new(1.0, ph.cos(), ph.sin());
        ata += w * row * row.transpose();
        atb += w * yi * row;
    }
    let cov = ata.try_inverse()?;
    let coef = cov * atb;
    Some(SinusoidFit {
        offset: coef[0],
        cos_amp: coef[1],
        sin_amp: coef[2],
        covariance: cov,
    })
}
