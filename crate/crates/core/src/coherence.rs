//! Ramsey interferometry under platform vibration.
//!
//! A free-space beam is fixed to the lab while the ion moves with the cryostat, so the
//! optical phase picks up k x(t). Chip-delivered light moves with the ion and that term
//! cancels exactly.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::consts::TAU;
use crate::numerics::fit::{line_fit, sinusoid_fit};
use crate::numerics::rng::keyed_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherenceError {
    #[error("contrast fit failed: {0}")]
    FitFailure(String),
    #[error("degenerate track: {0}")]
    DegenerateTrack(String),
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    FreeSpace,
    Integrated,
}

impl Delivery {
    pub fn as_str(self) -> &'static str {
        match self {
            Delivery::FreeSpace => "free_space",
            Delivery::Integrated => "integrated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationScenario {
    /// m
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub delivery: Delivery,
    /// m
    pub qubit_wavelength: f64,
    /// s
    pub baseline_coherence: f64,
}

impl VibrationScenario {
    pub fn validate(&self) -> Result<(), CoherenceError> {
        if !(self.amplitude >= 0.0 && self.frequency > 0.0 && self.baseline_coherence > 0.0 && self.qubit_wavelength > 0.0) {
            return Err(CoherenceError::Invalid(
                "need amplitude >= 0 and positive frequency, wavelength and coherence time".into(),
            ));
        }
        Ok(())
    }

    pub fn peak_velocity(&self) -> f64 {
        self.amplitude * self.frequency
    }

    pub fn peak_acceleration(&self) -> f64 {
        self.amplitude * self.frequency * self.frequency
    }

    /// Amplitude that gives peak acceleration `a` at this frequency.
    pub fn with_acceleration(&self, a: f64) -> Self {
        Self { amplitude: a / (self.frequency * self.frequency), ..*self }
    }

    pub fn with_delivery(&self, delivery: Delivery) -> Self {
        Self { delivery, ..*self }
    }

    /// Amplitude whose peak Doppler shift is `f_doppler` (Hz).
    pub fn amplitude_for_doppler(f_doppler: f64, frequency: f64, wavelength: f64) -> f64 {
        f_doppler * wavelength / frequency
    }
}

/// Peak Doppler shift A omega / lambda, Hz.
pub fn doppler_peak(scn: &VibrationScenario) -> f64 {
    scn.peak_velocity() / scn.qubit_wavelength
}

/// Gaussian phase diffusion with variance 2T/tau0, so that <cos> = e^(-T/tau0).
pub fn baseline_phase_noise<R: Rng + ?Sized>(t: f64, tau0: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (2.0 * t.max(0.0) / tau0).sqrt() * z
}

/// Optical phase from platform motion x(t) = A sin(omega t + theta) over a delay `t`.
pub fn vibration_phase(scn: &VibrationScenario, t: f64, theta: f64) -> f64 {
    let k = TAU / scn.qubit_wavelength;
    k * scn.amplitude * ((scn.frequency * t + theta).sin() - theta.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyResult {
    /// s
    pub delays: Vec<f64>,
    /// (contrast, standard error) per delay.
    pub contrasts: Vec<(f64, f64)>,
    /// s
    pub fitted_tau: f64,
    pub tau_err: f64,
    /// Points entering the exponential fit.
    pub fit_points: usize,
}

/// Contrast floor before taking logarithms.
pub const CONTRAST_FLOOR: f64 = 1e-3;

fn shot_bright(scn: &VibrationScenario, delay: f64, phase: f64, rng: &mut impl Rng) -> bool {
    let noise = baseline_phase_noise(delay, scn.baseline_coherence, rng);
    // drawn for both deliveries so the streams stay aligned
    let theta = rng.random::<f64>() * TAU;
    let coupling = match scn.delivery {
        Delivery::FreeSpace => 1.0,
        Delivery::Integrated => 0.0,
    };
    let dphi = noise + coupling * vibration_phase(scn, delay, theta);
    let p = (0.5 * (dphi - phase)).cos().powi(2);
    rng.random::<f64>() < p
}

/// Analysis phases evenly spaced over one fringe.
pub fn analysis_phases(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// Number of leading points used by [`fit_decay`]: everything up to and including the
/// first delay whose contrast is below 1/e. Vibration-limited fringes follow a Bessel
/// envelope with revivals past its first zero, which an exponential cannot describe.
pub fn decay_window(contrasts: &[(f64, f64)]) -> usize {
    contrasts
        .iter()
        .position(|c| c.0 < (-1f64).exp())
        .map(|k| k + 1)
        .unwrap_or(contrasts.len())
}

/// Fits contrast versus delay with an exponential by weighted least squares on
/// log-contrast over [`decay_window`]. Returns (tau, tau_err).
pub fn fit_decay(delays: &[f64], contrasts: &[(f64, f64)]) -> Result<(f64, f64), CoherenceError> {
    let n = decay_window(contrasts);
    if n < 3 {
        return Err(CoherenceError::FitFailure(format!("only {n} points before the 1/e crossing")));
    }
    let (delays, contrasts) = (&delays[..n], &contrasts[..n]);
    let y: Vec<f64> = contrasts.iter().map(|c| c.0.max(CONTRAST_FLOOR).ln()).collect();
    let w: Vec<f64> = contrasts
        .iter()
        .map(|&(c, e)| {
            let c = c.max(CONTRAST_FLOOR);
            let s = (e / c).max(1e-12);
            1.0 / (s * s)
        })
        .collect();
    let f = line_fit(delays, &y, &w).ok_or_else(|| CoherenceError::FitFailure("degenerate delay grid".into()))?;
    if !(f.slope < 0.0) {
        return Err(CoherenceError::FitFailure(format!("no decay: log-contrast slope {:.3e} /s", f.slope)));
    }
    let tau = -1.0 / f.slope;
    Ok((tau, f.slope_err() * tau * tau))
}

/// Ramsey sequence Monte Carlo. Each shot draws from a stream keyed by
/// (seed, delay index, phase index, shot index).
pub fn ramsey_scan(
    scn: &VibrationScenario,
    delays: &[f64],
    phases: &[f64],
    shots: usize,
    seed: u64,
) -> Result<RamseyResult, CoherenceError> {
    scn.validate()?;
    if shots < 100 {
        return Err(CoherenceError::Invalid(format!("{shots} shots per point, need at least 100")));
    }
    if phases.len() < 6 {
        return Err(CoherenceError::Invalid(format!("{} analysis phases, need at least 6", phases.len())));
    }
    if delays.windows(2).any(|w| !(w[1] > w[0])) || delays.iter().any(|&d| d < 0.0) {
        return Err(CoherenceError::Invalid("delays must be non-negative and increasing".into()));
    }
    let contrasts: Vec<(f64, f64)> = delays
        .par_iter()
        .enumerate()
        .map(|(i, &delay)| {
            let fractions: Vec<f64> = phases
                .iter()
                .enumerate()
                .map(|(j, &phase)| {
                    let bright = (0..shots)
                        .filter(|&s| {
                            let mut rng = keyed_rng(seed, &[i as u64, j as u64, s as u64]);
                            shot_bright(scn, delay, phase, &mut rng)
                        })
                        .count();
                    bright as f64 / shots as f64
                })
                .collect();
            // binomial variance, kept away from zero for saturated points
            let n = shots as f64;
            let var: Vec<f64> = fractions.iter().map(|&p| (p * (1.0 - p)).max(1.0 / n) / n).collect();
            let fit = sinusoid_fit(phases, &fractions, &var).expect("at least 6 distinct phases");
            ((2.0 * fit.amplitude()).min(1.0), 2.0 * fit.amplitude_err())
        })
        .collect();
    let fit_points = decay_window(&contrasts);
    if let Some(k) = contrasts[..fit_points]
        .windows(2)
        .position(|w| w[1].0 - w[0].0 > 5.0 * w[0].1.hypot(w[1].1))
    {
        return Err(CoherenceError::FitFailure(format!(
            "contrast rises from {:.4} to {:.4} between delays {:.3e} s and {:.3e} s",
            contrasts[k].0,
            contrasts[k + 1].0,
            delays[k],
            delays[k + 1]
        )));
    }
    let (fitted_tau, tau_err) = fit_decay(delays, &contrasts)?;
    Ok(RamseyResult { delays: delays.to_vec(), contrasts, fitted_tau, tau_err, fit_points })
}

/// Delays used for the fixture sweep, s.
pub fn default_delays() -> Vec<f64> {
    [0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 150.0, 200.0, 300.0, 400.0, 600.0, 800.0, 1000.0, 1200.0]
        .iter()
        .map(|us| us * 1e-6)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub acceleration: f64,
    pub delivery: Delivery,
    pub result: RamseyResult,
}

/// Ramsey scans over peak accelerations for one delivery. Each acceleration reuses the
/// same random streams, so integrated delivery yields identical results at every point.
pub fn acceleration_sweep(
    base: &VibrationScenario,
    delivery: Delivery,
    accelerations: &[f64],
    delays: &[f64],
    phases: &[f64],
    shots: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>, CoherenceError> {
    accelerations
        .iter()
        .map(|&a| {
            let scn = base.with_acceleration(a).with_delivery(delivery);
            Ok(SweepPoint { acceleration: a, delivery, result: ramsey_scan(&scn, delays, phases, shots, seed)? })
        })
        .collect()
}

/// `n` accelerations evenly spaced from 0 to `a_max`.
pub fn acceleration_grid(a_max: f64, n: usize) -> Vec<f64> {
    crate::numerics::linspace(0.0, a_max, n)
}

/// Slope of ln(tau) against acceleration with its standard error.
pub fn log_tau_slope(series: &[SweepPoint]) -> Result<(f64, f64), CoherenceError> {
    let a: Vec<f64> = series.iter().map(|p| p.acceleration).collect();
    let y: Vec<f64> = series.iter().map(|p| p.result.fitted_tau.ln()).collect();
    let w: Vec<f64> = series
        .iter()
        .map(|p| {
            let s = p.result.tau_err / p.result.fitted_tau;
            1.0 / (s * s)
        })
        .collect();
    let f = line_fit(&a, &y, &w).ok_or_else(|| CoherenceError::InsufficientStatistics("degenerate acceleration grid".into()))?;
    Ok((f.slope, f.slope_err()))
}

/// |d ln tau / da| for free-space delivery over the standard error of the same slope
/// fitted to integrated delivery: a lower bound on the vibration suppression factor.
pub fn suppression_bound(free: &[SweepPoint], integrated: &[SweepPoint]) -> Result<f64, CoherenceError> {
    if free.len() != integrated.len()
        || free.iter().zip(integrated).any(|(f, i)| (f.acceleration - i.acceleration).abs() > 1e-12 * f.acceleration.abs().max(1.0))
    {
        return Err(CoherenceError::Invalid("series do not share an acceleration grid".into()));
    }
    let (kf, _) = log_tau_slope(free)?;
    let (_, si) = log_tau_slope(integrated)?;
    if !(si > 0.0) {
        return Err(CoherenceError::InsufficientStatistics("integrated slope has zero uncertainty".into()));
    }
    Ok(kf.abs() / si)
}

/// Lower bound on peak acceleration from an imaged track: peak speed from chords between
/// consecutive frames, radius as the largest distance from the bounding-box centre, and
/// a = v^2 / r as for circular motion.
pub fn acceleration_from_track(points: &[Vector2<f64>], times: &[f64], resolution: f64) -> Result<f64, CoherenceError> {
    if points.len() < 3 || points.len() != times.len() {
        return Err(CoherenceError::DegenerateTrack("need at least 3 timestamped samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CoherenceError::DegenerateTrack("timestamps must increase".into()));
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).norm();
    if extent == 0.0 {
        return Ok(0.0);
    }
    if extent < resolution {
        return Err(CoherenceError::DegenerateTrack(format!(
            "extent {extent:.3e} m below resolution {resolution:.3e} m"
        )));
    }
    let centre = 0.5 * (lo + hi);
    let radius = points.iter().map(|p| (p - centre).norm()).fold(0.0, f64::max);
    let speed = points
        .windows(2)
        .zip(times.windows(2))
        .map(|(p, t)| (p[1] - p[0]).norm() / (t[1] - t[0]))
        .fold(0.0, f64::max);
    Ok(speed * speed / radius)
}
