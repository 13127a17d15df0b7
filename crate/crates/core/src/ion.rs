//! 88Sr+ response models that turn local beam intensity into observables.

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::beams::{fit_profile, intensity_at, BeamField};
use crate::consts::{ALPHA, AMU, C_LIGHT, EPSILON_0, E_CHARGE, HBAR, NM, PI, PLANCK, TAU};
use crate::numerics::fit::GaussianFit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IonError {
    #[error("sideband ratio out of range: red {red}, blue {blue}")]
    RatioOutOfRange { red: f64, blue: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("signal {signal} cannot be inverted by the {probe} model")]
    NotInvertible { probe: &'static str, signal: f64 },
    #[error("profile fit failed: {0}")]
    FitFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    pub qubit_wavelength: f64,
    /// D5/2 lifetime, s.
    pub d52_lifetime: f64,
    pub s_p_wavelength: f64,
    /// D3/2 and D5/2 repumpers.
    pub repump_wavelengths: [f64; 2],
    pub shelve_proxy_wavelength: f64,
    /// Tesla, normal to the chip.
    pub quantizing_field: f64,
}

impl IonSpecies {
    pub fn sr88() -> Self {
        Self {
            mass: 88.0 * AMU,
            qubit_wavelength: 674.0 * NM,
            d52_lifetime: 0.390,
            s_p_wavelength: 422.0 * NM,
            repump_wavelengths: [1092.0 * NM, 1033.0 * NM],
            shelve_proxy_wavelength: 408.0 * NM,
            quantizing_field: 4.3e-4,
        }
    }

    pub fn validate(&self) -> Result<(), IonError> {
        let ok = self.mass > 0.0
            && self.d52_lifetime > 0.0
            && self.qubit_wavelength > 0.0
            && self.s_p_wavelength > 0.0
            && self.shelve_proxy_wavelength > 0.0
            && self.repump_wavelengths.iter().all(|&w| w > 0.0);
        if ok {
            Ok(())
        } else {
            Err(IonError::Invalid("species masses, lifetimes and wavelengths must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiCalibration {
    /// W/m^2
    pub reference_intensity: f64,
    /// rad/s
    pub reference_rabi: f64,
    pub transition: String,
}

pub const QUBIT_TRANSITION: &str = "S1/2,mJ=-1/2 -> D5/2,mJ=-5/2";

impl RabiCalibration {
    /// Calibration that gives a pi time `t_pi` at `intensity`.
    pub fn from_pi_time(intensity: f64, t_pi: f64) -> Self {
        Self { reference_intensity: intensity, reference_rabi: PI / t_pi, transition: QUBIT_TRANSITION.into() }
    }

    pub fn validate(&self) -> Result<(), IonError> {
        if self.reference_intensity > 0.0 && self.reference_rabi > 0.0 {
            Ok(())
        } else {
            Err(IonError::Invalid("Rabi calibration must be positive".into()))
        }
    }
}

/// Omega = Omega_ref sqrt(I / I_ref).
pub fn rabi_at(cal: &RabiCalibration, intensity: f64) -> f64 {
    cal.reference_rabi * (intensity.max(0.0) / cal.reference_intensity).sqrt()
}

pub fn pi_time(rabi: f64) -> f64 {
    PI / rabi
}

/// Largest value of the Delta m = -2 quadrupole angular factor.
pub const MAX_QUADRUPOLE_ANGULAR_FACTOR: f64 = 0.408_248_290_463_863; // 1/sqrt(6)

/// Electric-quadrupole Rabi frequency on S1/2 -> D5/2 for a plane wave of intensity
/// `intensity`. The reduced matrix element follows from the D5/2 decay rate; the
/// Clebsch-Gordan coefficient of the stretched -1/2 -> -5/2 component is 1 and
/// `geometry_factor` scales the maximal 1/sqrt(6) angular factor.
pub fn first_principles_rabi(species: &IonSpecies, intensity: f64, geometry_factor: f64) -> f64 {
    let e0 = (2.0 * intensity.max(0.0) / (C_LIGHT * EPSILON_0)).sqrt();
    let k = TAU / species.qubit_wavelength;
    let gamma = 1.0 / species.d52_lifetime;
    let matrix = (15.0 * gamma / (ALPHA * C_LIGHT * k.powi(3))).sqrt();
    E_CHARGE * e0 / (2.0 * HBAR) * matrix * MAX_QUADRUPOLE_ANGULAR_FACTOR * geometry_factor.clamp(0.0, 1.0)
}

/// Two-beam saturation model for 422-nm fluorescence with a 1092-nm repumper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluorescenceParams {
    /// Detected rate with both transitions saturated, counts/s.
    pub max_rate: f64,
    /// W/m^2
    pub saturation_422: f64,
    /// W/m^2
    pub saturation_1092: f64,
}

/// P1/2 natural linewidth, rad/s.
pub const P12_LINEWIDTH: f64 = TAU * 21.5e6;

/// Two-level saturation intensity pi h c Gamma / (3 lambda^3) of the P1/2 decay at
/// wavelength `lambda`.
pub fn saturation_intensity(lambda: f64) -> f64 {
    PI * PLANCK * C_LIGHT * P12_LINEWIDTH / (3.0 * lambda.powi(3))
}

impl FluorescenceParams {
    pub fn textbook(max_rate: f64) -> Self {
        Self {
            max_rate,
            saturation_422: saturation_intensity(422.0 * NM),
            saturation_1092: saturation_intensity(1092.0 * NM),
        }
    }
}

fn saturation(s: f64) -> f64 {
    s / (1.0 + s)
}

/// R = R_max s422/(1+s422) s1092/(1+s1092).
pub fn fluorescence_rate(i422: f64, i1092: f64, p: &FluorescenceParams) -> f64 {
    p.max_rate * saturation(i422.max(0.0) / p.saturation_422) * saturation(i1092.max(0.0) / p.saturation_1092)
}

/// R_max that puts the detected rate at `rate` for the given intensities.
pub fn calibrate_max_rate(rate: f64, i422: f64, i1092: f64, p: &FluorescenceParams) -> f64 {
    rate / (saturation(i422 / p.saturation_422) * saturation(i1092 / p.saturation_1092))
}

/// Probability that a D5/2 ion survives a quench pulse: exp(-k I t).
pub fn quench_survival(intensity: f64, duration: f64, k_quench: f64) -> f64 {
    (-k_quench * intensity.max(0.0) * duration.max(0.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShelveParams {
    pub p_peak: f64,
    /// W/m^2
    pub i_peak: f64,
}

pub fn shelve_probability(intensity: f64, p: &ShelveParams) -> f64 {
    (p.p_peak * intensity.max(0.0) / p.i_peak).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionalState {
    pub nbar: f64,
    /// rad/s
    pub mode_frequency: f64,
    pub lamb_dicke: f64,
    /// quanta/s
    pub heating_rate: f64,
}

impl MotionalState {
    pub fn validate(&self) -> Result<(), IonError> {
        if !(self.nbar >= 0.0) {
            return Err(IonError::Invalid("nbar must be non-negative".into()));
        }
        if !(self.lamb_dicke >= 0.0 && self.lamb_dicke < 1.0) {
            return Err(IonError::Invalid("Lamb-Dicke parameter must lie in [0, 1)".into()));
        }
        if !(self.mode_frequency > 0.0) {
            return Err(IonError::Invalid("mode frequency must be positive".into()));
        }
        Ok(())
    }
}

/// eta = k cos(theta) sqrt(hbar / (2 m omega)).
pub fn lamb_dicke(species: &IonSpecies, mode_frequency: f64, projection_cosine: f64) -> f64 {
    let k = TAU / species.qubit_wavelength;
    k * projection_cosine.abs() * (HBAR / (2.0 * species.mass * mode_frequency)).sqrt()
}

/// Linear heating from the recorded rate.
pub fn heating_ledger(m: &MotionalState, wait: f64) -> f64 {
    m.nbar + m.heating_rate * wait.max(0.0)
}

/// Recorded axial heating rate, quanta/s.
pub const HEATING_RATE: f64 = 640.0;

/// Thermal occupation probabilities, truncated once the remaining tail is below 1e-12.
pub fn thermal_distribution(nbar: f64) -> Vec<f64> {
    if nbar <= 0.0 {
        return vec![1.0];
    }
    let ratio = nbar / (nbar + 1.0);
    let mut p = 1.0 / (nbar + 1.0);
    let mut out = Vec::new();
    let mut tail = 1.0;
    while tail > 1e-12 {
        out.push(p);
        tail -= p;
        p *= ratio;
        if out.len() > 100_000 {
            break;
        }
    }
    out
}

/// Rabi lineshape: Omega^2/(Omega^2+Delta^2) sin^2(sqrt(Omega^2+Delta^2) t/2).
pub fn rabi_lineshape(rabi: f64, detuning: f64, t: f64) -> f64 {
    let g2 = rabi * rabi + detuning * detuning;
    if g2 == 0.0 {
        return 0.0;
    }
    rabi * rabi / g2 * (0.5 * g2.sqrt() * t).sin().powi(2)
}

/// Excitation probability versus detuning (all angular) for a thermal state: the
/// carrier at 0, the red sideband at -omega and the blue sideband at +omega.
pub fn spectrum(carrier_rabi: f64, m: &MotionalState, detunings: &[f64], probe_time: f64) -> Vec<(f64, f64)> {
    let pn = thermal_distribution(m.nbar);
    let w = m.mode_frequency;
    let eta = m.lamb_dicke;
    detunings
        .par_iter()
        .map(|&d| {
            let mut p = 0.0;
            for (n, &pn) in pn.iter().enumerate() {
                let sn = (n as f64).sqrt();
                let sn1 = (n as f64 + 1.0).sqrt();
                p += pn
                    * (rabi_lineshape(carrier_rabi, d, probe_time)
                        + rabi_lineshape(carrier_rabi * eta * sn, d + w, probe_time)
                        + rabi_lineshape(carrier_rabi * eta * sn1, d - w, probe_time));
            }
            (d, p.min(1.0))
        })
        .collect()
}

/// Greedy peak picking: the `count` highest local maxima at least `min_separation`
/// apart, returned in order of detuning.
pub fn find_peaks(spec: &[(f64, f64)], count: usize, min_separation: f64) -> Vec<(f64, f64)> {
    let mut maxima: Vec<(f64, f64)> = (1..spec.len().saturating_sub(1))
        .filter(|&i| spec[i].1 > spec[i - 1].1 && spec[i].1 >= spec[i + 1].1)
        .map(|i| spec[i])
        .collect();
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut picked: Vec<(f64, f64)> = Vec::new();
    for m in maxima {
        if picked.len() == count {
            break;
        }
        if picked.iter().all(|p| (p.0 - m.0).abs() >= min_separation) {
            picked.push(m);
        }
    }
    picked.sort_by(|a, b| a.0.total_cmp(&b.0));
    picked
}

/// n = r/(1-r) with r = red/blue.
pub fn nbar_from_sidebands(red: f64, blue: f64) -> Result<f64, IonError> {
    if !(red >= 0.0 && red < blue) {
        return Err(IonError::RatioOutOfRange { red, blue });
    }
    let r = red / blue;
    Ok(r / (1.0 - r))
}

/// Probe settings for sideband thermometry: carrier Rabi frequency and duration such
/// that the blue-sideband pulse area is `area` for n = 0 and the off-resonant carrier
/// completes whole cycles at the sideband detuning.
pub fn thermometry_probe(m: &MotionalState, area: f64, nominal_time: f64) -> (f64, f64) {
    let mut t = nominal_time;
    let mut rabi = 2.0 * area / (m.lamb_dicke * t);
    for _ in 0..20 {
        let g = (rabi * rabi + m.mode_frequency * m.mode_frequency).sqrt();
        let k = (g * t / TAU).round().max(1.0);
        t = TAU * k / g;
        rabi = 2.0 * area / (m.lamb_dicke * t);
    }
    (rabi, t)
}

/// In-situ probe of one beam by an observable.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// Qubit Rabi frequency (rad/s).
    Rabi(RabiCalibration),
    /// Detected fluorescence (counts/s); the other beam is uniform free-space light.
    Fluorescence { params: FluorescenceParams, profiled: FluorescenceBeam, partner_intensity: f64 },
    /// Probability the ion is still dark after a quench pulse.
    Quench { k_quench: f64, duration: f64 },
    /// Probability the ion is shelved.
    Shelve(ShelveParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluorescenceBeam {
    Cooling422,
    Repump1092,
}

impl Probe {
    pub fn name(&self) -> &'static str {
        match self {
            Probe::Rabi(_) => "rabi",
            Probe::Fluorescence { .. } => "fluor",
            Probe::Quench { .. } => "quench",
            Probe::Shelve(_) => "shelve",
        }
    }

    pub fn signal(&self, intensity: f64) -> f64 {
        match self {
            Probe::Rabi(cal) => rabi_at(cal, intensity),
            Probe::Fluorescence { params, profiled, partner_intensity } => match profiled {
                FluorescenceBeam::Cooling422 => fluorescence_rate(intensity, *partner_intensity, params),
                FluorescenceBeam::Repump1092 => fluorescence_rate(*partner_intensity, intensity, params),
            },
            Probe::Quench { k_quench, duration } => quench_survival(intensity, *duration, *k_quench),
            Probe::Shelve(p) => shelve_probability(intensity, p),
        }
    }

    /// Intensity that produces `signal`.
    pub fn invert(&self, signal: f64) -> Result<f64, IonError> {
        let bad = || IonError::NotInvertible { probe: self.name(), signal };
        match self {
            Probe::Rabi(cal) => {
                if signal < 0.0 {
                    return Err(bad());
                }
                Ok(cal.reference_intensity * (signal / cal.reference_rabi).powi(2))
            }
            Probe::Fluorescence { params, profiled, partner_intensity } => {
                let (s_sat, partner_sat) = match profiled {
                    FluorescenceBeam::Cooling422 => (params.saturation_422, params.saturation_1092),
                    FluorescenceBeam::Repump1092 => (params.saturation_1092, params.saturation_422),
                };
                let f = signal / (params.max_rate * saturation(partner_intensity / partner_sat));
                if !(0.0..1.0).contains(&f) {
                    return Err(bad());
                }
                Ok(s_sat * f / (1.0 - f))
            }
            Probe::Quench { k_quench, duration } => {
                if !(signal > 0.0 && signal <= 1.0) {
                    return Err(bad());
                }
                Ok(-signal.ln() / (k_quench * duration))
            }
            Probe::Shelve(p) => {
                if !(0.0..1.0).contains(&signal) {
                    return Err(bad());
                }
                Ok(signal * p.i_peak / p.p_peak)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonProfile {
    /// (y, raw probe signal)
    pub signal: Vec<(f64, f64)>,
    /// (y, inferred intensity)
    pub intensity: Vec<(f64, f64)>,
    pub fit: GaussianFit,
}

/// Signal of `probe` with the ion at each of `positions`, inverted back to intensity
/// and fitted with a Gaussian along y.
pub fn profile_ion(probe: &Probe, beam: &BeamField, positions: &[Vector3<f64>]) -> Result<IonProfile, IonError> {
    let signal: Vec<(f64, f64)> = positions.iter().map(|p| (p.y, probe.signal(intensity_at(beam, p)))).collect();
    let intensity = signal
        .iter()
        .map(|&(y, s)| probe.invert(s).map(|i| (y, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = fit_profile(&intensity).ok_or_else(|| IonError::FitFailure(format!("{} probe", probe.name())))?;
    Ok(IonProfile { signal, intensity, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{KHZ, MHZ, US};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn calibrated_pi_time() {
        let cal = RabiCalibration::from_pi_time(3.0e5, 6.5 * US);
        assert_relative_eq!(pi_time(rabi_at(&cal, 3.0e5)), 6.5 * US, max_relative = 1e-15);
        assert_eq!(rabi_at(&cal, 0.0), 0.0);
        assert_relative_eq!(rabi_at(&cal, 1.2e6), 2.0 * cal.reference_rabi, max_relative = 1e-15);
    }

    /// Independent evaluation of the quadrupole coupling: Omega = (e E0 / hbar) |<S|r^2 C2|D>| k / 2
    /// with |<r^2>|^2 from A = c alpha k^5 |<r^2>|^2 / 15 in the stretched-state convention.
    fn quadrupole_oracle(lambda: f64, tau: f64, intensity: f64) -> f64 {
        let k = 2.0 * PI / lambda;
        let e0 = (2.0 * intensity / (299_792_458.0 * 8.8541878128e-12)).sqrt();
        let q2 = 15.0 / (tau * 299_792_458.0 * 7.2973525693e-3 * k.powi(5));
        1.602176634e-19 * e0 * k * q2.sqrt() / (2.0 * 1.054571817e-34) / 6f64.sqrt()
    }

    #[test]
    fn first_principles_matches_oracle() {
        let sp = IonSpecies::sr88();
        for i in [1e3, 2.84e5, 1e7] {
            assert_relative_eq!(
                first_principles_rabi(&sp, i, 1.0),
                quadrupole_oracle(674e-9, 0.390, i),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn first_principles_limits() {
        let sp = IonSpecies::sr88();
        let a = first_principles_rabi(&sp, 1e5, 1.0);
        assert_relative_eq!(first_principles_rabi(&sp, 2e5, 1.0), a * 2f64.sqrt(), max_relative = 1e-12);
        let long = IonSpecies { d52_lifetime: 1e30, ..sp };
        assert!(first_principles_rabi(&long, 1e5, 1.0) < 1e-10 * a);
    }

    #[test]
    fn fixture_spot_pi_time_within_factor_two() {
        let p = 10e-3 * 10f64.powf(-3.14);
        let i = 2.0 * p / (PI * 6.5e-6 * 2.5e-6);
        let t = pi_time(first_principles_rabi(&IonSpecies::sr88(), i, 1.0));
        assert!(t > 6.5 * US / 2.0 && t < 6.5 * US * 2.0, "t_pi = {t}");
    }

    #[test]
    fn fluorescence_limits() {
        let p = FluorescenceParams::textbook(1e5);
        assert!(fluorescence_rate(0.0, 1e3, &p) == 0.0);
        assert!(fluorescence_rate(1e-6, 1e-6, &p) < 1e-10);
        assert_relative_eq!(fluorescence_rate(1e12, 1e12, &p), 1e5, max_relative = 1e-6);
        // proportional to the product below saturation
        let a = fluorescence_rate(1e-3, 1e-3, &p);
        assert_relative_eq!(fluorescence_rate(2e-3, 3e-3, &p), 6.0 * a, max_relative = 1e-4);
        let rmax = calibrate_max_rate(4540.0, 30.0, 2.0, &p);
        let q = FluorescenceParams { max_rate: rmax, ..p };
        assert_relative_eq!(fluorescence_rate(30.0, 2.0, &q), 4540.0, max_relative = 1e-12);
    }

    #[test]
    fn saturation_intensity_textbook_scale() {
        // ~40 mW/cm^2 for the 422-nm line
        let s = saturation_intensity(422e-9);
        assert!(s > 300.0 && s < 500.0, "{s}");
    }

    #[test]
    fn quench_and_shelve() {
        assert_eq!(quench_survival(5.0, 0.0, 1.0), 1.0);
        assert_relative_eq!(quench_survival(2.0, 3.0, 2f64.ln() / 6.0), 0.5, max_relative = 1e-15);
        let p = ShelveParams { p_peak: 0.4, i_peak: 7.0 };
        assert_relative_eq!(shelve_probability(7.0, &p), 0.4);
        assert_eq!(shelve_probability(0.0, &p), 0.0);
        assert_eq!(shelve_probability(1e3, &p), 1.0);
    }

    #[test]
    fn lamb_dicke_values() {
        let sp = IonSpecies::sr88();
        let eta = lamb_dicke(&sp, TAU * 1.3 * MHZ, 1.0);
        // oracle: 2 pi / 674e-9 * sqrt(1.054571817e-34 / (2 * 88 * 1.66053906660e-27 * 2 pi * 1.3e6))
        let oracle = 2.0 * PI / 674e-9 * (1.054571817e-34 / (2.0 * 88.0 * 1.66053906660e-27 * 2.0 * PI * 1.3e6)).sqrt();
        assert_relative_eq!(eta, oracle, max_relative = 1e-12);
        assert!((eta - 0.062).abs() < 0.001);
        assert_eq!(lamb_dicke(&sp, TAU * 1.3 * MHZ, 0.0), 0.0);
        assert_relative_eq!(lamb_dicke(&sp, 4.0 * TAU * 1.3 * MHZ, 1.0), eta / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn heating() {
        let m = MotionalState { nbar: 0.5, mode_frequency: 1.0, lamb_dicke: 0.05, heating_rate: HEATING_RATE };
        assert_eq!(heating_ledger(&m, 0.0), 0.5);
        assert_relative_eq!(heating_ledger(&m, 1e-3), 1.14, max_relative = 1e-12);
        assert_relative_eq!(heating_ledger(&m, 10e-3), 6.9, max_relative = 1e-12);
    }

    #[test]
    fn thermal_distribution_normalized() {
        for nbar in [0.0, 0.1, 0.5, 2.0, 20.0] {
            let p = thermal_distribution(nbar);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-11);
            let mean: f64 = p.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            assert!((mean - nbar).abs() < 1e-8 * (1.0 + nbar));
        }
    }

    fn motional(nbar: f64, eta: f64) -> MotionalState {
        MotionalState { nbar, mode_frequency: TAU * 1.3 * MHZ, lamb_dicke: eta, heating_rate: 0.0 }
    }

    fn grid() -> Vec<f64> {
        (-1000..=1000).map(|k| TAU * 2.0 * KHZ * k as f64).collect()
    }

    #[test]
    fn no_sidebands_without_coupling() {
        let s = spectrum(TAU * 10.0 * KHZ, &motional(0.5, 0.0), &[-TAU * 1.3 * MHZ, TAU * 1.3 * MHZ], 50.0 * US);
        let carrier_tail = rabi_lineshape(TAU * 10.0 * KHZ, TAU * 1.3 * MHZ, 50.0 * US);
        assert!((s[0].1 - carrier_tail).abs() < 1e-15 && (s[1].1 - carrier_tail).abs() < 1e-15);
    }

    #[test]
    fn ground_state_has_no_red_sideband() {
        let m = motional(0.0, 0.05);
        let w = m.mode_frequency;
        let s = spectrum(TAU * 10.0 * KHZ, &m, &[-w, w], 50.0 * US);
        let tail = rabi_lineshape(TAU * 10.0 * KHZ, w, 50.0 * US);
        assert!((s[0].1 - tail).abs() < 1e-15);
        assert!(s[1].1 > 10.0 * tail);
    }

    #[test]
    fn peaks_at_carrier_and_sidebands() {
        let m = motional(0.5, 0.047);
        let s = spectrum(TAU * 10.0 * KHZ, &m, &grid(), 50.0 * US);
        let peaks = find_peaks(&s, 3, 0.5 * m.mode_frequency);
        assert_eq!(peaks.len(), 3);
        let step = TAU * 2.0 * KHZ;
        for (p, want) in peaks.iter().zip([-m.mode_frequency, 0.0, m.mode_frequency]) {
            assert!((p.0 - want).abs() <= step, "{} vs {}", p.0, want);
        }
        assert!(peaks[0].1 < peaks[2].1);
        assert!(s.iter().all(|p| p.1 <= 1.0 && p.1 >= 0.0));
    }

    #[test]
    fn sideband_ratio_inversion() {
        assert_eq!(nbar_from_sidebands(0.0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(nbar_from_sidebands(0.15, 0.3).unwrap(), 1.0, max_relative = 1e-15);
        assert!(matches!(nbar_from_sidebands(0.3, 0.3), Err(IonError::RatioOutOfRange { .. })));
    }

    #[test]
    fn thermometry_round_trip() {
        for nbar in [0.1, 0.5, 2.0] {
            let m = motional(nbar, 0.047);
            let (rabi, t) = thermometry_probe(&m, 0.1, 200.0 * US);
            let w = m.mode_frequency;
            let fine: Vec<f64> = (-200..=200).map(|k| TAU * 0.1 * KHZ * k as f64).collect();
            let red: Vec<f64> = fine.iter().map(|d| d - w).collect();
            let blue: Vec<f64> = fine.iter().map(|d| d + w).collect();
            let pr = find_peaks(&spectrum(rabi, &m, &red, t), 1, 0.0)[0].1;
            let pb = find_peaks(&spectrum(rabi, &m, &blue, t), 1, 0.0)[0].1;
            let n = nbar_from_sidebands(pr, pb).unwrap();
            assert!(((n - nbar) / nbar).abs() < 0.05, "nbar {nbar}: {n}");
        }
    }

    proptest! {
        #[test]
        fn spectrum_bounded(nbar in 0.0..5.0f64, eta in 0.0..0.3f64, d in -3.0..3.0f64) {
            let m = motional(nbar, eta);
            let s = spectrum(TAU * 50.0 * KHZ, &m, &[TAU * d * MHZ], 20.0 * US);
            prop_assert!(s[0].1 >= 0.0 && s[0].1 <= 1.0);
        }

        #[test]
        fn rabi_ratio_independent_of_intensity(i in 1.0..1e8f64) {
            let sp = IonSpecies::sr88();
            let cal = RabiCalibration::from_pi_time(1e5, 6.5e-6);
            let ratio = rabi_at(&cal, i) / first_principles_rabi(&sp, i, 1.0);
            let ref_ratio = rabi_at(&cal, 1e5) / first_principles_rabi(&sp, 1e5, 1.0);
            prop_assert!(((ratio - ref_ratio) / ref_ratio).abs() < 1e-12);
        }

        #[test]
        fn probes_invert_exactly(i in 1e-2..1.0f64) {
            let peak = 1e4;
            let probes = [
                Probe::Rabi(RabiCalibration::from_pi_time(peak, 6.5e-6)),
                Probe::Fluorescence { params: FluorescenceParams::textbook(1e5), profiled: FluorescenceBeam::Cooling422, partner_intensity: 5.0 },
                Probe::Fluorescence { params: FluorescenceParams::textbook(1e5), profiled: FluorescenceBeam::Repump1092, partner_intensity: 100.0 },
                Probe::Quench { k_quench: 2f64.ln() / (peak * 1e-6), duration: 1e-6 },
                Probe::Shelve(ShelveParams { p_peak: 0.4, i_peak: peak }),
            ];
            for p in &probes {
                let back = p.invert(p.signal(i * peak)).unwrap();
                prop_assert!(((back - i * peak) / (i * peak)).abs() < 1e-9, "{}", p.name());
            }
        }
    }
}
