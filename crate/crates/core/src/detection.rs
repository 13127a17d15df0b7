//! Photon-count state discrimination with D5/2 decay during the detection window.

use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::quad::simpson_nodes;
use crate::numerics::rng::keyed_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("invalid detection model: {0}")]
    Invalid(String),
}

/// Quadrature intervals over the decay-time variable.
pub const DECAY_QUADRATURE_INTERVALS: usize = 400;
/// Poisson supports are cut where the remaining tail is below this mass.
pub const TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    /// Bright-state count rate at the detector, counts/s.
    pub ion_rate: f64,
    /// counts/s
    pub background_rate: f64,
    /// Detection window, s.
    pub window: f64,
    /// D5/2 lifetime, s.
    pub d_lifetime: f64,
    /// When set, `ion_rate` is the total bright-state rate (ion plus background) and the
    /// ion alone contributes `ion_rate - background_rate`.
    pub bright_rate_includes_background: bool,
}

impl DetectionModel {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(self.ion_rate >= 0.0 && self.background_rate >= 0.0) {
            return Err(DetectionError::Invalid("rates must be non-negative".into()));
        }
        if !(self.window > 0.0) {
            return Err(DetectionError::Invalid("window must be positive".into()));
        }
        if !(self.d_lifetime > 0.0) {
            return Err(DetectionError::Invalid("lifetime must be positive".into()));
        }
        if self.bright_rate_includes_background && self.ion_rate < self.background_rate {
            return Err(DetectionError::Invalid("bright rate is below the background rate".into()));
        }
        Ok(())
    }

    /// Count rate contributed by the ion alone once it fluoresces.
    pub fn ion_only_rate(&self) -> f64 {
        if self.bright_rate_includes_background {
            self.ion_rate - self.background_rate
        } else {
            self.ion_rate
        }
    }

    pub fn bright_mean(&self) -> f64 {
        (self.ion_only_rate() + self.background_rate) * self.window
    }

    pub fn with_window(&self, window: f64) -> Self {
        Self { window, ..*self }
    }

    /// Analytic first moment of the dark histogram.
    pub fn dark_mean(&self) -> f64 {
        let t = self.window;
        let tau = self.d_lifetime;
        self.background_rate * t + self.ion_only_rate() * (t + tau * (-t / tau).exp_m1())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    /// P(k) for k = 0..len.
    pub probabilities: Vec<f64>,
}

impl CountHistogram {
    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probabilities.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Largest count with non-negligible probability, plus one.
    pub fn support(&self) -> usize {
        self.probabilities.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        let n: u64 = counts.iter().sum();
        Self { probabilities: counts.iter().map(|&c| c as f64 / n as f64).collect() }
    }
}

/// Smallest support that keeps the upper tail of Pois(mean) below [`TAIL_MASS`].
pub fn poisson_support(mean: f64) -> usize {
    let mut k = 0usize;
    let mut cdf = 0.0;
    let pmf = poisson_pmf(mean, (mean + 40.0 * mean.sqrt() + 60.0) as usize);
    for p in &pmf {
        cdf += p;
        k += 1;
        if 1.0 - cdf < TAIL_MASS && k as f64 > mean {
            break;
        }
    }
    k
}

/// Poisson probabilities for k = 0..len, built iteratively in log space.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    if mean <= 0.0 {
        let mut v = vec![0.0; len.max(1)];
        v[0] = 1.0;
        return v;
    }
    let lm = mean.ln();
    let mut lp = -mean;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        if k > 0 {
            lp += lm - (k as f64).ln();
        }
        out.push(lp.exp());
    }
    out
}

/// Discrete convolution truncated to `len` entries.
pub fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn support_for(model: &DetectionModel) -> usize {
    poisson_support(model.bright_mean().max(model.background_rate * model.window))
}

/// Poisson histogram of the bright state.
pub fn bright_histogram(model: &DetectionModel) -> CountHistogram {
    CountHistogram { probabilities: poisson_pmf(model.bright_mean(), support_for(model)) }
}

/// Quadrature nodes `(t, weight)` for integrals of (1/tau) e^(-t/tau) f(t) over [0, T].
///
/// The window is cut into panels one lifetime long (at most 30, past which the weight
/// is negligible). On each panel [t0, t1] the substitution
/// v = e^(-t0/tau) - e^(-t/tau) turns the weight into dv, so composite Simpson in v sees
/// a smooth integrand and integrates the weight itself exactly.
pub fn decay_nodes(window: f64, tau: f64, intervals: usize) -> Vec<(f64, f64)> {
    let end = window.min(30.0 * tau);
    let panels = ((end / tau).ceil() as usize).max(1);
    let mut nodes = Vec::with_capacity(panels * (intervals + 1));
    for j in 0..panels {
        let t0 = j as f64 * tau;
        let t1 = (t0 + tau).min(end);
        if t1 <= t0 {
            break;
        }
        let scale = (-t0 / tau).exp();
        let v_max = -scale * (-(t1 - t0) / tau).exp_m1();
        for (v, w) in simpson_nodes(0.0, v_max, intervals) {
            let t = (t0 - tau * (-v / scale).ln_1p()).min(t1);
            nodes.push((t, w));
        }
    }
    nodes
}

/// Dark-state histogram including decay to the bright state during the window: the
/// undecayed atom e^(-T/tau) Pois(bg T) plus the decay-time integral of
/// Pois(bg T) * Pois(r (T - t)) over [`decay_nodes`].
pub fn dark_histogram_with_decay(model: &DetectionModel) -> CountHistogram {
    let len = support_for(model);
    let t_win = model.window;
    let tau = model.d_lifetime;
    let bg = poisson_pmf(model.background_rate * t_win, len);
    let survive = (-t_win / tau).exp();
    let mut p: Vec<f64> = bg.iter().map(|&b| survive * b).collect();
    let rate = model.ion_only_rate();
    let nodes = decay_nodes(t_win, tau, DECAY_QUADRATURE_INTERVALS);
    let parts: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&(t, w)| {
            let ion = poisson_pmf(rate * (t_win - t).max(0.0), len);
            convolve(&bg, &ion, len).into_iter().map(|v| v * w).collect()
        })
        .collect();
    for part in parts {
        for (a, b) in p.iter_mut().zip(part) {
            *a += b;
        }
    }
    CountHistogram { probabilities: p }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    /// Counts at or below the threshold are classified dark.
    pub threshold: usize,
    pub eps_d: f64,
    pub eps_b: f64,
    pub mean_fidelity: f64,
}

/// Threshold minimizing (eps_d + eps_b)/2; ties resolve to the lowest threshold.
pub fn fidelity(bright: &CountHistogram, dark: &CountHistogram) -> Fidelity {
    let n = bright.support().max(dark.support());
    let mut cdf_b = 0.0;
    let mut cdf_d = 0.0;
    let total_d = dark.total();
    let mut best: Option<Fidelity> = None;
    for k in 0..n {
        cdf_b += bright.get(k);
        cdf_d += dark.get(k);
        let eps_b = cdf_b;
        let eps_d = (total_d - cdf_d).max(0.0);
        let f = 1.0 - 0.5 * (eps_b + eps_d);
        if best.is_none_or(|b| f > b.mean_fidelity) {
            best = Some(Fidelity { threshold: k, eps_d, eps_b, mean_fidelity: f });
        }
    }
    best.unwrap_or(Fidelity { threshold: 0, eps_d: 0.0, eps_b: 0.0, mean_fidelity: 1.0 })
}

pub fn model_fidelity(model: &DetectionModel) -> Fidelity {
    fidelity(&bright_histogram(model), &dark_histogram_with_decay(model))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSweep {
    pub points: Vec<(f64, Fidelity)>,
    /// Index of the best window.
    pub best: usize,
}

pub fn fidelity_vs_window(model: &DetectionModel, windows: &[f64]) -> WindowSweep {
    let points: Vec<(f64, Fidelity)> = windows.par_iter().map(|&t| (t, model_fidelity(&model.with_window(t)))).collect();
    let best = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.mean_fidelity.total_cmp(&b.1 .1.mean_fidelity))
        .map(|(i, _)| i)
        .unwrap_or(0);
    WindowSweep { points, best }
}

fn poisson_draw<R: rand::Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as u64
    }
}

/// Stream tags separating bright and dark sampling.
const STREAM_DARK: u64 = 0xD;
const STREAM_BRIGHT: u64 = 0xB;

/// Counts of one dark-prepared shot: exponential decay time, then background and
/// post-decay ion counts drawn independently.
fn dark_shot(model: &DetectionModel, seed: u64, shot: u64) -> u64 {
    let mut rng = keyed_rng(seed, &[STREAM_DARK, shot]);
    let t = Exp::new(1.0 / model.d_lifetime).unwrap().sample(&mut rng);
    let bg = poisson_draw(model.background_rate * model.window, &mut rng);
    let ion = if t < model.window { poisson_draw(model.ion_only_rate() * (model.window - t), &mut rng) } else { 0 };
    bg + ion
}

fn bright_shot(model: &DetectionModel, seed: u64, shot: u64) -> u64 {
    let mut rng = keyed_rng(seed, &[STREAM_BRIGHT, shot]);
    poisson_draw(model.bright_mean(), &mut rng)
}

fn tally<F: Fn(u64) -> u64 + Sync>(shots: u64, f: F) -> Vec<u64> {
    (0..shots)
        .into_par_iter()
        .fold(Vec::new, |mut acc: Vec<u64>, s| {
            let k = f(s) as usize;
            if acc.len() <= k {
                acc.resize(k + 1, 0);
            }
            acc[k] += 1;
            acc
        })
        .reduce(Vec::new, |mut a, b| {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        })
}

/// Empirical dark histogram from `shots` simulated shots, keyed per (seed, shot).
pub fn sample_dark_histogram(model: &DetectionModel, shots: u64, seed: u64) -> CountHistogram {
    CountHistogram::from_counts(&tally(shots, |s| dark_shot(model, seed, s)))
}

pub fn sample_bright_histogram(model: &DetectionModel, shots: u64, seed: u64) -> CountHistogram {
    CountHistogram::from_counts(&tally(shots, |s| bright_shot(model, seed, s)))
}

/// Fidelity from finite-shot histograms.
pub fn sampled_fidelity(model: &DetectionModel, shots: u64, seed: u64) -> Fidelity {
    fidelity(&sample_bright_histogram(model, shots, seed), &sample_dark_histogram(model, shots, seed))
}

pub fn total_variation(a: &CountHistogram, b: &CountHistogram) -> f64 {
    let n = a.support().max(b.support());
    0.5 * (0..n).map(|k| (a.get(k) - b.get(k)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fixture_rates(includes_bg: bool) -> DetectionModel {
        DetectionModel {
            ion_rate: 4540.0,
            background_rate: 967.0,
            window: 5e-3,
            d_lifetime: 0.390,
            bright_rate_includes_background: includes_bg,
        }
    }

    /// Poisson pmf via the closed form with a direct factorial.
    fn pois(mean: f64, k: usize) -> f64 {
        let lf: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        (k as f64 * mean.ln() - mean - lf).exp()
    }

    /// Dark histogram oracle: midpoint rule in t with 2e5 cells, Poisson of the summed mean.
    fn dark_oracle(m: &DetectionModel, k: usize) -> f64 {
        let n = 200_000;
        let dt = m.window / n as f64;
        let r = m.ion_only_rate();
        let b = m.background_rate * m.window;
        let mut acc = (-m.window / m.d_lifetime).exp() * pois(b, k);
        for i in 0..n {
            let t = (i as f64 + 0.5) * dt;
            acc += dt / m.d_lifetime * (-t / m.d_lifetime).exp() * pois(b + r * (m.window - t), k);
        }
        acc
    }

    #[test]
    fn bright_mean_and_variance() {
        let h = bright_histogram(&fixture_rates(false));
        assert_relative_eq!(h.mean(), 27.535, max_relative = 1e-9);
        assert_relative_eq!(h.variance(), 27.535, max_relative = 1e-9);
        assert!((h.total() - 1.0).abs() < 1e-9);
        let flagged = bright_histogram(&fixture_rates(true));
        assert_relative_eq!(flagged.mean(), 22.7, max_relative = 1e-9);
    }

    #[test]
    fn zero_window_is_point_mass() {
        let m = DetectionModel { window: 1e-15, ..fixture_rates(false) };
        assert!((bright_histogram(&m).get(0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn convolution_of_poissons_is_poisson() {
        let a = poisson_pmf(3.0, 60);
        let b = poisson_pmf(5.5, 60);
        let c = convolve(&a, &b, 60);
        for (k, v) in c.iter().enumerate() {
            assert!((v - pois(8.5, k)).abs() < 1e-15);
        }
    }

    #[test]
    fn dark_matches_midpoint_oracle() {
        for flag in [false, true] {
            let m = fixture_rates(flag);
            let h = dark_histogram_with_decay(&m);
            for k in [0, 3, 5, 8, 12, 20] {
                let o = dark_oracle(&m, k);
                assert!((h.get(k) - o).abs() < 1e-9 * o.max(1e-6), "k={k}: {} vs {o}", h.get(k));
            }
        }
    }

    #[test]
    fn dark_first_moment_identity() {
        for m in [fixture_rates(false), fixture_rates(true), DetectionModel { d_lifetime: 2e-3, ..fixture_rates(false) }] {
            let h = dark_histogram_with_decay(&m);
            assert!((h.total() - 1.0).abs() < 1e-9);
            assert_relative_eq!(h.mean(), m.dark_mean(), max_relative = 1e-6);
        }
    }

    #[test]
    fn decay_weights_integrate_exactly() {
        for (w, tau) in [(5e-3, 0.39), (5e-3, 1e-4), (5e-3, 1e-12), (1.0, 1e-3)] {
            let nodes = decay_nodes(w, tau, DECAY_QUADRATURE_INTERVALS);
            let mass: f64 = nodes.iter().map(|n| n.1).sum();
            assert_relative_eq!(mass, -(-w / tau as f64).exp_m1(), max_relative = 1e-9);
            let mean_t: f64 = nodes.iter().map(|n| n.0 * n.1).sum();
            let exact = tau - (w + tau) * (-w / tau).exp();
            assert_relative_eq!(mean_t, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn lifetime_limits() {
        let long = DetectionModel { d_lifetime: 1e12, ..fixture_rates(false) };
        let h = dark_histogram_with_decay(&long);
        for k in 0..20 {
            assert!((h.get(k) - pois(967.0 * 5e-3, k)).abs() < 1e-9);
        }
        let short = DetectionModel { d_lifetime: 1e-12, ..fixture_rates(false) };
        let d = dark_histogram_with_decay(&short);
        let b = bright_histogram(&short);
        assert!(total_variation(&d, &b) < 1e-6);
    }

    #[test]
    fn fidelity_limits() {
        let h = bright_histogram(&fixture_rates(false));
        assert_relative_eq!(fidelity(&h, &h).mean_fidelity, 0.5, max_relative = 1e-12);
        let dark = CountHistogram { probabilities: vec![0.7, 0.3] };
        let bright = CountHistogram { probabilities: vec![0.0, 0.0, 0.2, 0.8] };
        let f = fidelity(&bright, &dark);
        assert_eq!(f.mean_fidelity, 1.0);
        assert_eq!(f.threshold, 1);
    }

    #[test]
    fn fixture_fidelity() {
        // midpoint-oracle histograms evaluated independently of the module
        let oracle_fidelity = |m: &DetectionModel| {
            let n = 80;
            let bright: Vec<f64> = (0..n).map(|k| pois(m.bright_mean(), k)).collect();
            let dark: Vec<f64> = (0..n).map(|k| dark_oracle(m, k)).collect();
            (0..n)
                .map(|t| {
                    let eb: f64 = bright[..=t].iter().sum();
                    let ed: f64 = dark[t + 1..].iter().sum();
                    1.0 - 0.5 * (eb + ed)
                })
                .fold(0.0, f64::max)
        };
        for flag in [true, false] {
            let m = fixture_rates(flag);
            let f = model_fidelity(&m);
            assert!((f.mean_fidelity - oracle_fidelity(&m)).abs() < 1e-8);
        }
        let f = model_fidelity(&fixture_rates(true));
        assert_eq!(f.threshold, 11);
        assert!((f.mean_fidelity - 0.990).abs() < 0.005);
    }

    #[test]
    fn window_sweep_has_interior_maximum() {
        let windows: Vec<f64> = (1..=20).map(|k| k as f64 * 1e-3).collect();
        let s = fidelity_vs_window(&fixture_rates(true), &windows);
        assert!(s.best > 0 && s.best < windows.len() - 1);
        let tiny = model_fidelity(&fixture_rates(true).with_window(1e-7));
        assert!(tiny.mean_fidelity < 0.51);
        let long = fidelity_vs_window(&fixture_rates(true), &[0.2, 0.5, 1.0]);
        assert!(long.points[0].1.mean_fidelity > long.points[1].1.mean_fidelity);
        assert!(long.points[1].1.mean_fidelity > long.points[2].1.mean_fidelity);
    }

    #[test]
    fn monte_carlo_is_schedule_invariant() {
        let m = fixture_rates(true);
        let a = sample_dark_histogram(&m, 20_000, 7);
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sample_dark_histogram(&m, 20_000, 7));
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_agrees_at_small_scale() {
        let m = fixture_rates(true);
        let mc = sample_dark_histogram(&m, 1_000_000, 3);
        assert!(total_variation(&mc, &dark_histogram_with_decay(&m)) < 3e-3);
        let f = sampled_fidelity(&m, 200_000, 11);
        assert!((f.mean_fidelity - model_fidelity(&m).mean_fidelity).abs() < 2e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn threshold_invariant_under_time_units(s in 0.1..10.0f64, rate in 500.0..8000.0f64, bg in 0.0..2000.0f64) {
            let m = DetectionModel { ion_rate: rate, background_rate: bg, window: 5e-3, d_lifetime: 0.39, bright_rate_includes_background: false };
            let scaled = DetectionModel { ion_rate: rate / s, background_rate: bg / s, window: 5e-3 * s, d_lifetime: 0.39 * s, ..m };
            let a = model_fidelity(&m);
            let b = model_fidelity(&scaled);
            prop_assert_eq!(a.threshold, b.threshold);
            prop_assert!((a.mean_fidelity - b.mean_fidelity).abs() < 1e-9);
        }

        #[test]
        fn histograms_normalized(rate in 0.0..8000.0f64, bg in 0.0..2000.0f64, w in 1e-4..2e-2f64, tau in 1e-3..1.0f64) {
            let m = DetectionModel { ion_rate: rate, background_rate: bg, window: w, d_lifetime: tau, bright_rate_includes_background: false };
            let d = dark_histogram_with_decay(&m);
            prop_assert!((d.total() - 1.0).abs() < 1e-9);
            prop_assert!(d.probabilities.iter().all(|&p| p >= 0.0));
            prop_assert!((bright_histogram(&m).total() - 1.0).abs() < 1e-9);
        }
    }
}
