//! Pipeline stages shared by the command line and the reference run, and the checks
//! that compare the reference run against the published anchors.

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::beams::{
    axial_cut, reconstruct_beam, standard_heights, synthesize_stack, AxialCut, BeamField, BeamReconstruction,
    FocalStack, Grid,
};
use crate::channels::{delivered_power, LossStage, OpticalChannel};
use crate::coherence::{
    acceleration_grid, acceleration_sweep, analysis_phases, doppler_peak, suppression_bound, Delivery, SweepPoint,
};
use crate::consts::{MHZ, TAU, UM, US};
use crate::detection::{
    bright_histogram, dark_histogram_with_decay, fidelity_vs_window, model_fidelity, sample_bright_histogram,
    sample_dark_histogram, total_variation, CountHistogram, Fidelity, WindowSweep,
};
use crate::ion::{
    find_peaks, first_principles_rabi, nbar_from_sidebands, pi_time, profile_ion, rabi_at, spectrum,
    thermometry_probe, FluorescenceBeam, IonProfile, MotionalState, Probe,
};
use crate::numerics::arange_inclusive;
use crate::numerics::rng::keyed_rng;
use crate::output::{json_document, num, svg_plot, write_atomic, Series, Table};
use crate::photonics::{
    aim, design_period, diffraction_orders, emission_angle, intersection_height, waveguide_neff, GratingSpec,
    Intersection,
};
use crate::scenario::Scenario;
use crate::trap::{
    null_at, relax_equilibrium, secular_modes, shuttle_scan, solve_axial_well, to_hz, unit_gradient,
    unit_potential, NullPoint, WellSolution,
};
use crate::Result;

/// Published loss totals per channel label, dB.
pub const LOSS_TOTALS_DB: [(&str, f64); 4] = [("422", 35.0), ("461", 31.5), ("674", 31.4), ("1092", 26.4)];
pub const FIDELITY_ANCHOR: f64 = 0.990;
pub const PI_TIME_ANCHOR: f64 = 6.5e-6;
pub const DELIVERED_674_ANCHOR: f64 = 7.24e-6;
pub const AXIAL_ANCHOR_HZ: f64 = 1.3e6;
pub const NULL_HEIGHT_ANCHOR: f64 = 55e-6;
pub const OFFSET_HEIGHT_ANCHOR: f64 = 65e-6;
pub const TAU0_ANCHOR: f64 = 600e-6;
pub const SUPPRESSION_ANCHOR: f64 = 25.0;
pub const DOPPLER_ANCHOR: f64 = 9e3;
/// Fitted 1/e^2 diameters along the trap axis per profiled beam.
pub const DIAMETER_ANCHORS: [(&str, f64); 5] =
    [("674", 13e-6), ("422", 8.5e-6), ("1092", 5.5e-6), ("1033", 6.7e-6), ("408", 11.3e-6)];
/// Largest waveguide width still single mode at 405 nm, and one that is not.
pub const SINGLE_MODE_405: (f64, f64) = (250e-9, 1.1e-6);

const STREAM_NOISE: u64 = 0x6e6f_6973;
const STREAM_TRAP: u64 = 0x7472_6170;

fn missing(kind: &str, name: &str) -> crate::Error {
    crate::scenario::ScenarioError::Invalid { path: kind.into(), message: format!("no {kind} named {name}") }.into()
}

pub fn beam_of<'a>(scn: &'a Scenario, name: &str) -> Result<&'a BeamField> {
    scn.beam(name).ok_or_else(|| missing("beams", name))
}

pub fn channel_of<'a>(scn: &'a Scenario, label: &str) -> Result<&'a OpticalChannel> {
    scn.channel(label).ok_or_else(|| missing("channels", label))
}

pub fn grating_of<'a>(scn: &'a Scenario, name: &str) -> Result<&'a GratingSpec> {
    scn.grating(name).ok_or_else(|| missing("gratings", name))
}

// ---------------------------------------------------------------------------------
// loss

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub label: String,
    pub wavelength: f64,
    pub stages: Vec<(LossStage, f64, bool)>,
    pub total_db: f64,
    pub delivered_power: f64,
}

pub fn loss_rows(scn: &Scenario) -> Vec<LossRow> {
    scn.channels
        .iter()
        .map(|c| LossRow {
            label: c.label.clone(),
            wavelength: c.wavelength,
            stages: c.ledger.entries.iter().map(|e| (e.stage, e.loss_db, e.inferred)).collect(),
            total_db: c.ledger.total_db(),
            delivered_power: delivered_power(c),
        })
        .collect()
}

pub fn loss_table(rows: &[LossRow]) -> Table {
    let mut t = Table::new(&["channel", "wavelength_nm", "stage", "loss_db", "provenance"]);
    for r in rows {
        for (stage, db, inferred) in &r.stages {
            let prov = if *inferred { "inferred" } else { "measured" };
            t.push(vec![r.label.clone(), num(r.wavelength * 1e9), stage.as_str().into(), num(*db), prov.into()]);
        }
        t.push(vec![r.label.clone(), num(r.wavelength * 1e9), "total".into(), num(r.total_db), String::new()]);
    }
    t
}

pub fn loss_json(rows: &[LossRow]) -> serde_json::Value {
    json!(rows
        .iter()
        .map(|r| json!({
            "channel": r.label,
            "wavelength_nm": r.wavelength * 1e9,
            "total_db": r.total_db,
            "delivered_power_uw": r.delivered_power * 1e6,
        }))
        .collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------------
// gratings

/// A grating re-indexed with the design stack at `wavelength`.
pub fn design_grating(scn: &Scenario, g: &GratingSpec, wavelength: f64) -> Result<GratingSpec> {
    Ok(g.reindexed(&scn.design_stack, wavelength)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GratingDesignRow {
    pub grating: String,
    pub wavelength: f64,
    pub target_angle: f64,
    pub design_n_eff: f64,
    pub period: f64,
    pub scenario_period: f64,
    pub recovered_angle: f64,
}

/// Period that aims each grating at the trap center with the design indices, and the
/// angle recovered from that period.
pub fn grating_designs(scn: &Scenario) -> Result<Vec<GratingDesignRow>> {
    let target = Vector3::new(0.0, 0.0, scn.target_height);
    scn.gratings
        .iter()
        .zip(&scn.grating_wavelengths)
        .map(|(g, &lambda)| {
            let (theta, _) = aim(&g.position, &target);
            let design = design_grating(scn, g, lambda)?;
            let n = design.n_eff_grating();
            let period = design_period(n, lambda, theta)?;
            let back = emission_angle(&GratingSpec { period, ..design }, lambda, 1)?;
            Ok(GratingDesignRow {
                grating: g.name.clone(),
                wavelength: lambda,
                target_angle: theta,
                design_n_eff: n,
                period,
                scenario_period: g.period,
                recovered_angle: back,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GratingAngleRow {
    pub beam: String,
    pub grating: String,
    pub wavelength: f64,
    pub n_eff: f64,
    pub angle: f64,
    pub design_angle: f64,
}

/// First-order emission angle of every beam that leaves a grating, with fabricated and
/// design indices.
pub fn grating_angles(scn: &Scenario) -> Result<Vec<GratingAngleRow>> {
    let mut rows = Vec::new();
    for b in &scn.file.beams {
        let ch = channel_of(scn, &b.channel)?;
        let g = grating_of(scn, &ch.grating)?;
        let lambda = b.wavelength_nm * 1e-9;
        let actual = g.reindexed(&scn.stack, lambda)?;
        let design = design_grating(scn, g, lambda)?;
        rows.push(GratingAngleRow {
            beam: b.name.clone(),
            grating: g.name.clone(),
            wavelength: lambda,
            n_eff: actual.n_eff_grating(),
            angle: emission_angle(&actual, lambda, 1)?,
            design_angle: emission_angle(&design, lambda, 1)?,
        });
    }
    Ok(rows)
}

/// Propagating diffraction orders of each grating at its design wavelength.
pub fn grating_orders(scn: &Scenario) -> Vec<(String, f64, Vec<(u32, f64)>)> {
    scn.gratings
        .iter()
        .zip(&scn.grating_wavelengths)
        .map(|(g, &l)| (g.name.clone(), l, diffraction_orders(g, l)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub grating_a: String,
    pub grating_b: String,
    pub design: Intersection,
    pub fabricated: Intersection,
    /// Mean fabricated minus design grating index of the pair.
    pub index_error: f64,
    /// Design crossing re-evaluated with the uniform index error applied.
    pub shifted: Intersection,
}

/// Crossing of the first-order beams of the gratings feeding beams `a` and `b`, with the
/// design indices and with the fabricated ones.
pub fn grating_crossing(scn: &Scenario, a: &str, b: &str) -> Result<CrossingReport> {
    let pick = |name: &str| -> Result<(GratingSpec, GratingSpec, f64)> {
        let beam = scn.file.beams.iter().find(|x| x.name == name).ok_or_else(|| missing("beams", name))?;
        let lambda = beam.wavelength_nm * 1e-9;
        let g = grating_of(scn, &channel_of(scn, &beam.channel)?.grating)?;
        Ok((g.reindexed(&scn.stack, lambda)?, design_grating(scn, g, lambda)?, lambda))
    };
    let (fa, da, la) = pick(a)?;
    let (fb, db, lb) = pick(b)?;
    let index_error = 0.5 * ((fa.n_eff_grating() - da.n_eff_grating()) + (fb.n_eff_grating() - db.n_eff_grating()));
    Ok(CrossingReport {
        grating_a: fa.name.clone(),
        grating_b: fb.name.clone(),
        design: intersection_height(&da, &db, la, lb, 0.0)?,
        fabricated: intersection_height(&fa, &fb, la, lb, 0.0)?,
        index_error,
        shifted: intersection_height(&da, &db, la, lb, index_error)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeVerdict {
    pub label: String,
    pub width: f64,
    pub wavelength: f64,
    pub n_eff: f64,
    pub single_mode: bool,
    /// Verdict the waveguide was designed for.
    pub expected: bool,
}

pub fn single_mode_verdicts(scn: &Scenario) -> Result<Vec<ModeVerdict>> {
    let mut cases: Vec<(String, f64, f64, bool)> = scn
        .channels
        .iter()
        .map(|c: &OpticalChannel| (c.label.clone(), c.waveguide_width, c.wavelength, true))
        .collect();
    cases.push(("405 narrow".into(), SINGLE_MODE_405.0, 405e-9, true));
    cases.push(("405 wide".into(), SINGLE_MODE_405.1, 405e-9, false));
    cases
        .into_iter()
        .map(|(label, width, wavelength, expected)| {
            let m = waveguide_neff(&scn.stack, width, wavelength)?;
            Ok(ModeVerdict { label, width, wavelength, n_eff: m.neff, single_mode: m.single_mode, expected })
        })
        .collect()
}

// ---------------------------------------------------------------------------------
// beams

pub fn beam_cut(scn: &Scenario, name: &str) -> Result<AxialCut> {
    Ok(axial_cut(beam_of(scn, name)?, scn.profiling.cut_height, scn.profiling.cut_line)?)
}

/// Imaging grid for a focal stack: +-80 um around the centerline at mid-stack.
pub fn profiling_grid(beam: &BeamField, heights: &[f64], spacing: f64) -> Grid {
    let mid = 0.5 * (heights[0] + heights[heights.len() - 1]);
    let c = beam.centerline_at_height(mid);
    Grid { center: Vector2::new(c.x, c.y), half_width: 80.0 * UM, spacing }
}

pub fn beam_stack(beam: &BeamField) -> FocalStack {
    let heights = standard_heights();
    let grid = profiling_grid(beam, &heights, 0.5 * UM);
    synthesize_stack(beam, &heights, grid)
}

pub fn beam_profile(scn: &Scenario, name: &str) -> Result<(FocalStack, BeamReconstruction)> {
    let stack = beam_stack(beam_of(scn, name)?);
    let r = reconstruct_beam(&stack)?;
    Ok((stack, r))
}

/// Largest relative error of the reconstructed angle, waists and focus distances.
pub fn reconstruction_error(beam: &BeamField, r: &BeamReconstruction) -> f64 {
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    [
        rel(r.emission_angle, beam.polar_angle()),
        rel(r.waist_focused, beam.waist_focused),
        rel(r.waist_unfocused, beam.waist_unfocused),
        rel(r.focus_distance_focused, beam.focus_distance_focused),
        rel(r.focus_distance_unfocused, beam.focus_distance_unfocused),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Worst relative waist error over `trials` reconstructions with additive Gaussian
/// noise of `noise` times the stack peak.
pub fn noisy_waist_error(beam: &BeamField, noise: f64, trials: u64, seed: u64) -> Result<f64> {
    let clean = beam_stack(beam);
    let peak = clean.slices.iter().flatten().cloned().fold(0.0, f64::max);
    let dist = Normal::new(0.0, noise * peak).expect("finite noise scale");
    let errs: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = keyed_rng(seed, &[STREAM_NOISE, t]);
            let mut noisy = clean.clone();
            for v in noisy.slices.iter_mut().flatten() {
                *v += dist.sample(&mut rng);
            }
            let r = reconstruct_beam(&noisy)?;
            let ef = ((r.waist_focused - beam.waist_focused) / beam.waist_focused).abs();
            let eu = ((r.waist_unfocused - beam.waist_unfocused) / beam.waist_unfocused).abs();
            Ok(ef.max(eu))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------------
// in-situ profiling

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Rabi,
    Fluorescence422,
    Fluorescence1092,
    Quench,
    Shelve,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 5] =
        [ProbeKind::Rabi, ProbeKind::Fluorescence422, ProbeKind::Fluorescence1092, ProbeKind::Quench, ProbeKind::Shelve];

    pub fn label(self) -> &'static str {
        match self {
            ProbeKind::Rabi => "rabi",
            ProbeKind::Fluorescence422 => "fluor-422",
            ProbeKind::Fluorescence1092 => "fluor-1092",
            ProbeKind::Quench => "quench",
            ProbeKind::Shelve => "shelve",
        }
    }

    /// Probe observable and the name of the beam it profiles.
    pub fn probe(self, scn: &Scenario) -> (Probe, String) {
        let f = &scn.fluorescence;
        match self {
            ProbeKind::Rabi => (Probe::Rabi(scn.rabi.clone()), scn.rabi_beam.clone()),
            ProbeKind::Fluorescence422 => (
                Probe::Fluorescence {
                    params: f.params,
                    profiled: FluorescenceBeam::Cooling422,
                    partner_intensity: f.free_space_1092,
                },
                f.beam_422.clone(),
            ),
            ProbeKind::Fluorescence1092 => (
                Probe::Fluorescence {
                    params: f.params,
                    profiled: FluorescenceBeam::Repump1092,
                    partner_intensity: f.free_space_422,
                },
                f.beam_1092.clone(),
            ),
            ProbeKind::Quench => {
                (Probe::Quench { k_quench: scn.k_quench, duration: scn.quench_duration }, scn.quench_beam.clone())
            }
            ProbeKind::Shelve => (Probe::Shelve(scn.shelve), scn.shelve_beam.clone()),
        }
    }
}

/// Ion positions along the profiling scan, each the equilibrium of a solved axial well.
pub fn ion_positions(scn: &Scenario) -> Result<Vec<Vector3<f64>>> {
    let ys = scn.profiling.ion_scan.ys();
    Ok(shuttle_scan(&scn.trap, &ys, scn.axial_frequency)?.into_iter().map(|w| w.position).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeComparison {
    pub kind: ProbeKind,
    pub beam: String,
    pub profile: IonProfile,
    pub cut: AxialCut,
    /// Center offset from the direct cut as a fraction of the cut diameter.
    pub center_error: f64,
    /// Relative diameter difference from the direct cut.
    pub diameter_error: f64,
}

pub fn profile_comparison(scn: &Scenario, kind: ProbeKind, positions: &[Vector3<f64>]) -> Result<ProbeComparison> {
    let (probe, beam) = kind.probe(scn);
    let field = beam_of(scn, &beam)?;
    let profile = profile_ion(&probe, field, positions)?;
    let cut = axial_cut(field, scn.profiling.cut_height, scn.profiling.cut_line)?;
    let d = cut.fit.diameter();
    Ok(ProbeComparison {
        kind,
        center_error: (profile.fit.center - cut.fit.center).abs() / d,
        diameter_error: ((profile.fit.diameter() - d) / d).abs(),
        beam,
        profile,
        cut,
    })
}

// ---------------------------------------------------------------------------------
// spectroscopy

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// (detuning Hz, excitation probability)
    pub points: Vec<(f64, f64)>,
    /// Carrier and sideband peaks, Hz.
    pub peaks: Vec<(f64, f64)>,
}

pub fn spectrum_scan(scn: &Scenario) -> SpectrumReport {
    let det: Vec<f64> =
        arange_inclusive(-scn.spectrum_span, scn.spectrum_span, scn.spectrum_step).iter().map(|d| TAU * d).collect();
    let spec = spectrum(scn.spectrum_rabi, &scn.motion, &det, scn.spectrum_probe_time);
    let peaks = find_peaks(&spec, 3, 0.5 * scn.motion.mode_frequency);
    let hz = |v: Vec<(f64, f64)>| v.into_iter().map(|(d, p)| (d / TAU, p)).collect();
    SpectrumReport { points: hz(spec), peaks: hz(peaks) }
}

/// Pulse area and nominal duration of the thermometry probe.
pub const THERMOMETRY_AREA: f64 = 0.1;
pub const THERMOMETRY_TIME: f64 = 200e-6;

/// n-bar recovered from the red and blue sideband heights of a simulated spectrum.
pub fn thermometry(scn: &Scenario, nbar: f64) -> Result<f64> {
    let m = MotionalState { nbar, ..scn.motion };
    let (rabi, t) = thermometry_probe(&m, THERMOMETRY_AREA, THERMOMETRY_TIME);
    let fine = |c: f64| -> Vec<f64> { (-200..=200).map(|k| c + TAU * 100.0 * k as f64).collect() };
    let peak = |c: f64| spectrum(rabi, &m, &fine(c), t).into_iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(nbar_from_sidebands(peak(-m.mode_frequency), peak(m.mode_frequency))?)
}

// ---------------------------------------------------------------------------------
// detection

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub fidelity: Fidelity,
    pub dark: CountHistogram,
    pub bright: CountHistogram,
    pub windows: WindowSweep,
}

pub fn detection_report(scn: &Scenario) -> DetectionReport {
    let windows: Vec<f64> = (1..=40).map(|k| 0.25e-3 * k as f64).collect();
    DetectionReport {
        fidelity: model_fidelity(&scn.detection),
        dark: dark_histogram_with_decay(&scn.detection),
        bright: bright_histogram(&scn.detection),
        windows: fidelity_vs_window(&scn.detection, &windows),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloCheck {
    pub shots: u64,
    pub tv_dark: f64,
    pub tv_bright: f64,
}

pub fn detection_monte_carlo(scn: &Scenario, report: &DetectionReport, shots: u64, seed: u64) -> MonteCarloCheck {
    let dark = sample_dark_histogram(&scn.detection, shots, seed);
    let bright = sample_bright_histogram(&scn.detection, shots, seed);
    MonteCarloCheck {
        shots,
        tv_dark: total_variation(&dark, &report.dark),
        tv_bright: total_variation(&bright, &report.bright),
    }
}

// ---------------------------------------------------------------------------------
// trap

/// RF nulls along the shuttle line.
pub fn trap_nulls(scn: &Scenario) -> Result<Vec<NullPoint>> {
    Ok(scn.shuttle.ys().iter().map(|&y| null_at(&scn.trap, y)).collect::<std::result::Result<_, _>>()?)
}

pub fn trap_well(scn: &Scenario, y: f64, axial: f64) -> Result<WellSolution> {
    Ok(solve_axial_well(&scn.trap, y, axial)?)
}

pub fn trap_shuttle(scn: &Scenario) -> Result<Vec<WellSolution>> {
    Ok(shuttle_scan(&scn.trap, &scn.shuttle.ys(), scn.axial_frequency)?)
}

/// Secular frequencies after multiplying every DC voltage of `well` by `factor` and
/// letting the ion relax.
pub fn scaled_well(scn: &Scenario, well: &WellSolution, factor: f64) -> Result<[f64; 3]> {
    let volts: Vec<(String, f64)> = well.dc_voltages.iter().map(|(n, v)| (n.clone(), v * factor)).collect();
    let trap = scn.trap.with_dc_voltages(&volts);
    let p = relax_equilibrium(&trap, &well.position);
    secular_modes(&trap, &p).map(|m| m.0).ok_or_else(|| {
        crate::trap::TrapError::Infeasible {
            y: p.y,
            reason: format!("Hessian not positive definite at DC scale {factor}"),
            condition: f64::NAN,
        }
        .into()
    })
}

fn trap_samples(scn: &Scenario, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = keyed_rng(seed, &[STREAM_TRAP]);
    let h = scn.target_height;
    (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-2.0 * h..2.0 * h),
                rng.random_range(-2.0 * h..2.0 * h),
                rng.random_range(0.4 * h..2.0 * h),
            )
        })
        .collect()
}

/// Largest |Laplacian| of any unit patch potential over sample points, finite
/// differences with step 0.1 um, scaled by the squared ion height.
pub fn laplacian_residual(scn: &Scenario, n: usize, seed: u64) -> f64 {
    let h = 0.1 * UM;
    let l2 = scn.target_height * scn.target_height;
    let pts = trap_samples(scn, n, seed);
    scn.trap
        .patches
        .par_iter()
        .map(|e| {
            pts.iter()
                .map(|p| {
                    let f = |d: Vector3<f64>| unit_potential(e, &(p + d));
                    let c = f(Vector3::zeros());
                    let sum: f64 = (0..3)
                        .map(|i| {
                            let mut d = Vector3::zeros();
                            d[i] = h;
                            f(d) + f(-d) - 2.0 * c
                        })
                        .sum();
                    (sum / (h * h) * l2).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest relative difference between the analytic gradient and a central finite
/// difference of the potential.
pub fn gradient_mismatch(scn: &Scenario, n: usize, seed: u64) -> f64 {
    let h = 0.01 * UM;
    let pts = trap_samples(scn, n, seed ^ 1);
    scn.trap
        .patches
        .par_iter()
        .map(|e| {
            pts.iter()
                .map(|p| {
                    let g = unit_gradient(e, p);
                    let fd = Vector3::from_fn(|i, _| {
                        let mut d = Vector3::zeros();
                        d[i] = h;
                        (unit_potential(e, &(p + d)) - unit_potential(e, &(p - d))) / (2.0 * h)
                    });
                    (g - fd).norm() / g.norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

// ---------------------------------------------------------------------------------
// Ramsey

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyReport {
    pub free: Vec<SweepPoint>,
    pub integrated: Vec<SweepPoint>,
    pub suppression: f64,
    pub doppler_at_max: f64,
}

pub fn ramsey_sweep(scn: &Scenario, seed: u64) -> Result<RamseyReport> {
    let s = &scn.sweep;
    let accel = acceleration_grid(s.a_max, s.points);
    let phases = analysis_phases(s.phases);
    let run = |d: Delivery| acceleration_sweep(&s.base, d, &accel, &s.delays, &phases, s.shots, seed);
    let free = run(Delivery::FreeSpace)?;
    let integrated = run(Delivery::Integrated)?;
    let suppression = suppression_bound(&free, &integrated)?;
    Ok(RamseyReport {
        doppler_at_max: doppler_peak(&s.base.with_acceleration(s.a_max)),
        free,
        integrated,
        suppression,
    })
}

// ---------------------------------------------------------------------------------
// checks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |value - target| <= tolerance
    Absolute,
    /// |value - target| <= tolerance * |target|
    Relative,
    /// value <= target
    AtMost,
    /// value >= target
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(criterion: u32, name: impl Into<String>, value: f64, target: f64, tolerance: f64, cmp: Comparison) -> Self {
        let pass = match cmp {
            Comparison::Absolute => (value - target).abs() <= tolerance,
            Comparison::Relative => (value - target).abs() <= tolerance * target.abs(),
            Comparison::AtMost => value <= target,
            Comparison::AtLeast => value >= target,
        };
        Self { criterion, name: name.into(), value, target, tolerance, comparison: cmp, pass }
    }

    pub fn abs(c: u32, name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(c, name, value, target, tol, Comparison::Absolute)
    }

    pub fn rel(c: u32, name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(c, name, value, target, tol, Comparison::Relative)
    }

    pub fn at_most(c: u32, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(c, name, value, limit, 0.0, Comparison::AtMost)
    }

    pub fn at_least(c: u32, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(c, name, value, limit, 0.0, Comparison::AtLeast)
    }

    /// A yes/no property recorded as 1 (holds) against a target of 1.
    pub fn holds(c: u32, name: impl Into<String>, ok: bool) -> Self {
        Self::abs(c, name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::Absolute => format!("{} +- {}", self.target, self.tolerance),
            Comparison::Relative => format!("{} +- {}%", self.target, self.tolerance * 100.0),
            Comparison::AtMost => format!("<= {}", self.target),
            Comparison::AtLeast => format!(">= {}", self.target),
        };
        format!(
            "{} [{}] {}: {} (want {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.value,
            op
        )
    }
}

/// A named output file of the reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub hash: String,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn criterion(&self, c: u32) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |k| k.criterion == c)
    }

    /// Writes every artifact plus `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            write_atomic(&dir.join(&a.name), &a.contents)?;
        }
        let mut t = Table::new(&["criterion", "name", "value", "target", "tolerance", "comparison", "pass"]);
        for c in &self.checks {
            let cmp = serde_json::to_value(c.comparison).expect("enum serializes");
            t.push(vec![
                c.criterion.to_string(),
                c.name.clone(),
                num(c.value),
                num(c.target),
                num(c.tolerance),
                cmp.as_str().unwrap_or_default().to_string(),
                c.pass.to_string(),
            ]);
        }
        write_atomic(&dir.join("report.csv"), &t.to_csv(&self.hash))?;
        let body = json!({ "passed": self.passed(), "checks": self.checks });
        write_atomic(&dir.join("report.json"), &json_document(&self.hash, body))?;
        Ok(())
    }
}

pub fn check_loss(scn: &Scenario) -> Vec<Check> {
    let rows = loss_rows(scn);
    LOSS_TOTALS_DB
        .iter()
        .map(|(label, want)| {
            let got = rows.iter().find(|r| r.label == *label).map_or(f64::NAN, |r| r.total_db);
            Check::abs(1, format!("total loss {label} dB"), got, *want, 0.0)
        })
        .collect()
}

pub fn check_detection(scn: &Scenario, shots: u64, seed: u64) -> (Vec<Check>, DetectionReport) {
    let rep = detection_report(scn);
    let mc = detection_monte_carlo(scn, &rep, shots, seed);
    let checks = vec![
        Check::abs(2, "mean detection fidelity", rep.fidelity.mean_fidelity, FIDELITY_ANCHOR, 0.005),
        Check::at_most(2, "TV model vs Monte Carlo, dark", mc.tv_dark, 1e-3),
        Check::at_most(2, "TV model vs Monte Carlo, bright", mc.tv_bright, 1e-3),
        Check::abs(2, "dark first moment", rep.dark.mean(), scn.detection.dark_mean(), 1e-6),
        Check::abs(2, "bright first moment", rep.bright.mean(), scn.detection.bright_mean(), 1e-6),
    ];
    (checks, rep)
}

/// Peak intensity of the qubit beam at the profiling height, from its delivered power
/// and dimensions.
pub fn qubit_intensity(scn: &Scenario) -> Result<f64> {
    let b = beam_of(scn, &scn.rabi_beam)?;
    Ok(b.intensity(&b.centerline_at_height(scn.profiling.cut_height)))
}

pub fn check_pi_time(scn: &Scenario) -> Result<Vec<Check>> {
    let t_cal = pi_time(rabi_at(&scn.rabi, scn.rabi.reference_intensity));
    let beam = beam_of(scn, &scn.rabi_beam)?;
    let delivered = beam.power;
    let fp = pi_time(first_principles_rabi(&scn.species, qubit_intensity(scn)?, scn.geometry_factor));
    let ratio = fp / t_cal;
    Ok(vec![
        Check::rel(3, "calibrated pi time s", t_cal, PI_TIME_ANCHOR, 1e-12),
        Check::abs(3, "delivered 674 power uW", delivered * 1e6, DELIVERED_674_ANCHOR * 1e6, 0.005),
        Check::at_most(3, "first-principles / calibrated pi time (max of ratio, inverse)", ratio.max(1.0 / ratio), 2.0),
    ])
}

pub fn check_spectrum(scn: &Scenario) -> Result<(Vec<Check>, SpectrumReport)> {
    let rep = spectrum_scan(scn);
    let w = scn.motion.mode_frequency / TAU;
    let step = scn.spectrum_step;
    let mut checks = Vec::new();
    for (name, want) in [("red sideband Hz", -w), ("carrier Hz", 0.0), ("blue sideband Hz", w)] {
        let got = rep
            .peaks
            .iter()
            .map(|p| p.0)
            .min_by(|a, b| (a - want).abs().total_cmp(&(b - want).abs()))
            .unwrap_or(f64::NAN);
        checks.push(Check::abs(4, name, got, want, step));
    }
    checks.push(Check::rel(4, "mode frequency vs published axial Hz", w, AXIAL_ANCHOR_HZ, 1e-9));
    for n in [0.1, 0.5, 2.0] {
        checks.push(Check::rel(4, format!("thermometry nbar {n}"), thermometry(scn, n)?, n, 0.05));
    }
    Ok((checks, rep))
}

pub fn check_profiles(scn: &Scenario) -> Result<(Vec<Check>, Vec<ProbeComparison>)> {
    let pos = ion_positions(scn)?;
    let cmp: Vec<ProbeComparison> =
        ProbeKind::ALL.iter().map(|&k| profile_comparison(scn, k, &pos)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for c in &cmp {
        let l = c.kind.label();
        checks.push(Check::at_most(5, format!("{l} center offset / cut diameter"), c.center_error, 0.03));
        checks.push(Check::at_most(5, format!("{l} diameter vs cut"), c.diameter_error, 0.03));
        if let Some((_, d)) = DIAMETER_ANCHORS.iter().find(|a| a.0 == c.beam) {
            checks.push(Check::rel(5, format!("{l} fitted diameter um"), c.profile.fit.diameter() * 1e6, d * 1e6, 0.02));
        }
    }
    Ok((checks, cmp))
}

pub fn check_trap(scn: &Scenario, seed: u64) -> Result<(Vec<Check>, WellSolution)> {
    let null = null_at(&scn.trap, 0.0)?;
    let well = trap_well(scn, 0.0, scn.axial_frequency)?;
    let f0 = well.axial_frequency();
    let mut checks = vec![
        Check::abs(6, "RF null height um", null.position.z * 1e6, NULL_HEIGHT_ANCHOR * 1e6, 0.5),
        Check::at_most(6, "Laplacian residual (scaled)", laplacian_residual(scn, 200, seed), 1e-4),
        Check::at_most(6, "gradient vs finite difference (relative)", gradient_mismatch(scn, 200, seed), 1e-6),
        Check::rel(6, "axial frequency Hz", to_hz(f0), AXIAL_ANCHOR_HZ, 0.01),
    ];
    for k in [0.5, 2.0] {
        let f = scaled_well(scn, &well, k)?[1];
        checks.push(Check::rel(6, format!("axial frequency ratio at DC x{k}"), f / f0, k.sqrt(), 0.01));
    }
    let alt = scn.alt_axial_frequency;
    let f_alt = scaled_well(scn, &well, (alt / f0).powi(2))?[1];
    checks.push(Check::rel(6, "rescaled axial frequency Hz", to_hz(f_alt), to_hz(alt), 0.01));
    Ok((checks, well))
}

pub fn check_ramsey(scn: &Scenario, seed: u64) -> Result<(Vec<Check>, RamseyReport)> {
    let rep = ramsey_sweep(scn, seed)?;
    let tau0 = scn.sweep.base.baseline_coherence;
    let mut checks = vec![
        Check::rel(7, "free-space tau at A=0 us", rep.free[0].result.fitted_tau / US, TAU0_ANCHOR / US, 0.05),
        Check::rel(7, "integrated tau at A=0 us", rep.integrated[0].result.fitted_tau / US, TAU0_ANCHOR / US, 0.05),
    ];
    let worst_sigma = rep
        .integrated
        .iter()
        .map(|p| (p.result.fitted_tau - tau0).abs() / p.result.tau_err)
        .fold(0.0, f64::max);
    checks.push(Check::at_most(7, "integrated tau deviation from tau0 (sigma)", worst_sigma, 2.0));
    let decreasing = rep.free.windows(2).all(|w| w[1].result.fitted_tau < w[0].result.fitted_tau);
    checks.push(Check::holds(7, "free-space tau strictly decreasing", decreasing));
    checks.push(Check::at_least(7, "suppression bound", rep.suppression, SUPPRESSION_ANCHOR));
    checks.push(Check::rel(7, "doppler peak at a_max Hz", rep.doppler_at_max, DOPPLER_ANCHOR, 0.02));
    Ok((checks, rep))
}

pub struct PhotonicsOutcome {
    pub checks: Vec<Check>,
    pub designs: Vec<GratingDesignRow>,
    pub crossing: CrossingReport,
    pub modes: Vec<ModeVerdict>,
    pub reconstructions: Vec<(String, BeamReconstruction)>,
}

/// Beams whose focal stacks are reconstructed.
pub const RECONSTRUCTED: [&str; 2] = ["674", "422"];
pub const NOISE_TRIALS: u64 = 100;

pub fn check_photonics(scn: &Scenario, seed: u64) -> Result<PhotonicsOutcome> {
    let mut checks = Vec::new();
    let mut reconstructions = Vec::new();
    for name in RECONSTRUCTED {
        let beam = beam_of(scn, name)?;
        let (_, r) = beam_profile(scn, name)?;
        checks.push(Check::at_most(8, format!("{name} reconstruction error, noise-free"), reconstruction_error(beam, &r), 0.01));
        let noisy = noisy_waist_error(beam, 0.01, NOISE_TRIALS, seed)?;
        checks.push(Check::at_most(8, format!("{name} worst waist error, 1% noise"), noisy, 0.05));
        reconstructions.push((name.to_string(), r));
    }
    let designs = grating_designs(scn)?;
    let inverse = designs.iter().map(|d| (d.recovered_angle - d.target_angle).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most(8, "design/angle inverse identity rad", inverse, 1e-9));
    let modes = single_mode_verdicts(scn)?;
    for m in &modes {
        let name = format!(
            "{} waveguide {} nm at {} nm single mode = {}",
            m.label,
            (m.width * 1e9).round(),
            (m.wavelength * 1e9).round(),
            m.expected
        );
        checks.push(Check::holds(8, name, m.single_mode == m.expected));
    }
    let crossing = grating_crossing(scn, "674", "422")?;
    let shift = crossing.fabricated.height - crossing.design.height;
    let linear = crossing.design.dz_dn * crossing.index_error;
    let published = OFFSET_HEIGHT_ANCHOR - NULL_HEIGHT_ANCHOR;
    checks.push(Check::holds(
        8,
        "crossing shift under index error agrees in sign with the published offset",
        shift.signum() == published.signum() && linear.signum() == published.signum(),
    ));
    checks.push(Check::abs(8, "design crossing height um", crossing.design.height * 1e6, scn.target_height * 1e6, 0.5));
    Ok(PhotonicsOutcome { checks, designs, crossing, modes, reconstructions })
}

// ---------------------------------------------------------------------------------
// artifacts

fn table(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Table {
    let mut t = Table::new(columns);
    for r in rows {
        t.push(r);
    }
    t
}

pub fn spectrum_table(rep: &SpectrumReport) -> Table {
    table(&["detuning_hz", "p_dark"], rep.points.iter().map(|(d, p)| vec![num(*d), num(*p)]))
}

pub fn profile_table(cmp: &[ProbeComparison]) -> Table {
    let rows = cmp.iter().flat_map(|c| {
        c.profile.signal.iter().zip(&c.profile.intensity).map(move |(s, i)| {
            vec![c.kind.label().into(), c.beam.clone(), num(s.0 * 1e6), num(s.1), num(i.1)]
        })
    });
    table(&["probe", "beam", "y_um", "signal", "intensity_w_per_m2"], rows)
}

pub fn ramsey_table(rep: &RamseyReport) -> Table {
    let rows = rep.free.iter().chain(&rep.integrated).map(|p| {
        vec![
            p.delivery.as_str().into(),
            num(p.acceleration),
            num(p.result.fitted_tau / US),
            num(p.result.tau_err / US),
            p.result.fit_points.to_string(),
        ]
    });
    table(&["delivery", "acceleration_m_per_s2", "tau_us", "tau_err_us", "fit_points"], rows)
}

pub fn detection_table(rep: &DetectionReport) -> Table {
    let rows = rep.windows.points.iter().map(|(w, f)| {
        vec![num(w * 1e3), f.threshold.to_string(), num(f.eps_d), num(f.eps_b), num(f.mean_fidelity)]
    });
    table(&["window_ms", "threshold", "eps_dark", "eps_bright", "mean_fidelity"], rows)
}

pub fn histogram_table(rep: &DetectionReport) -> Table {
    let n = rep.dark.support().max(rep.bright.support());
    table(&["counts", "p_dark", "p_bright"], (0..n).map(|k| vec![k.to_string(), num(rep.dark.get(k)), num(rep.bright.get(k))]))
}

pub fn cuts_table(cmp: &[ProbeComparison]) -> Table {
    let rows = cmp.iter().map(|c| {
        vec![
            c.kind.label().into(),
            c.beam.clone(),
            num(c.cut.fit.center * 1e6),
            num(c.cut.fit.diameter() * 1e6),
            num(c.profile.fit.center * 1e6),
            num(c.profile.fit.diameter() * 1e6),
        ]
    });
    table(&["probe", "beam", "cut_center_um", "cut_diameter_um", "ion_center_um", "ion_diameter_um"], rows)
}

pub fn grating_json(p: &PhotonicsOutcome) -> serde_json::Value {
    let c = &p.crossing;
    json!({
        "designs": p.designs.iter().map(|d| json!({
            "grating": d.grating,
            "wavelength_nm": d.wavelength * 1e9,
            "target_angle_deg": d.target_angle.to_degrees(),
            "design_n_eff": d.design_n_eff,
            "period_nm": d.period * 1e9,
            "scenario_period_nm": d.scenario_period * 1e9,
        })).collect::<Vec<_>>(),
        "crossing": {
            "gratings": [c.grating_a, c.grating_b],
            "design_height_um": c.design.height * 1e6,
            "height_um": c.fabricated.height * 1e6,
            "index_error": c.index_error,
            "dz_dn": c.design.dz_dn * 1e6,
            "shifted_height_um": c.shifted.height * 1e6,
        },
        "modes": p.modes.iter().map(|m| json!({
            "label": m.label,
            "width_nm": m.width * 1e9,
            "wavelength_nm": m.wavelength * 1e9,
            "n_eff": m.n_eff,
            "single_mode": m.single_mode,
        })).collect::<Vec<_>>(),
        "reconstructions": p.reconstructions.iter().map(|(n, r)| json!({
            "beam": n,
            "emission_angle_deg": r.emission_angle.to_degrees(),
            "waist_focused_um": r.waist_focused * 1e6,
            "waist_unfocused_um": r.waist_unfocused * 1e6,
            "focus_height_focused_um": r.focus_height_focused * 1e6,
            "focus_height_unfocused_um": r.focus_height_unfocused * 1e6,
        })).collect::<Vec<_>>(),
    })
}

/// Runs every stage on `scn`, compares against the anchors and collects the artifacts.
pub fn reproduce(scn: &Scenario, seed: u64) -> Result<Report> {
    let h = scn.hash.as_str();
    let mut checks = check_loss(scn);
    let mut artifacts = vec![Artifact { name: "loss.csv".into(), contents: loss_table(&loss_rows(scn)).to_csv(h) }];

    let (c, det) = check_detection(scn, scn.monte_carlo_shots, seed);
    checks.extend(c);
    artifacts.push(Artifact { name: "detection_window.csv".into(), contents: detection_table(&det).to_csv(h) });
    artifacts.push(Artifact { name: "histograms.csv".into(), contents: histogram_table(&det).to_csv(h) });

    checks.extend(check_pi_time(scn)?);

    let (c, spec) = check_spectrum(scn)?;
    checks.extend(c);
    artifacts.push(Artifact { name: "spectrum.csv".into(), contents: spectrum_table(&spec).to_csv(h) });
    let series = [Series { name: "p_dark".into(), points: spec.points.iter().map(|p| (p.0 / MHZ, p.1)).collect(), scatter: false }];
    artifacts.push(Artifact {
        name: "spectrum.svg".into(),
        contents: svg_plot(h, "Qubit spectrum", "detuning (MHz)", "P(dark)", &series),
    });

    let (c, cmp) = check_profiles(scn)?;
    checks.extend(c);
    artifacts.push(Artifact { name: "profiles.csv".into(), contents: profile_table(&cmp).to_csv(h) });
    artifacts.push(Artifact { name: "cuts.csv".into(), contents: cuts_table(&cmp).to_csv(h) });

    let (c, well) = check_trap(scn, seed)?;
    checks.extend(c);
    let well_json = json!({
        "position_um": [well.position.x * 1e6, well.position.y * 1e6, well.position.z * 1e6],
        "secular_frequencies_mhz": well.secular_frequencies.map(|w| to_hz(w) / MHZ),
        "dc_voltages_v": well.dc_voltages.iter().map(|(n, v)| json!({"electrode": n, "voltage_v": v})).collect::<Vec<_>>(),
        "condition_number": well.condition_number,
    });
    artifacts.push(Artifact { name: "trap_well.json".into(), contents: json_document(h, well_json) });

    let (c, ramsey) = check_ramsey(scn, seed)?;
    checks.extend(c);
    artifacts.push(Artifact { name: "ramsey.csv".into(), contents: ramsey_table(&ramsey).to_csv(h) });
    let tau_series = |pts: &[SweepPoint], name: &str| Series {
        name: name.into(),
        points: pts.iter().map(|p| (p.acceleration, p.result.fitted_tau / US)).collect(),
        scatter: true,
    };
    artifacts.push(Artifact {
        name: "ramsey.svg".into(),
        contents: svg_plot(
            h,
            "Ramsey coherence under vibration",
            "peak acceleration (m/s^2)",
            "tau (us)",
            &[tau_series(&ramsey.free, "free space"), tau_series(&ramsey.integrated, "integrated")],
        ),
    });

    let ph = check_photonics(scn, seed)?;
    checks.extend(ph.checks.iter().cloned());
    artifacts.push(Artifact { name: "photonics.json".into(), contents: json_document(h, grating_json(&ph)) });

    checks.sort_by_key(|c| c.criterion);
    Ok(Report { hash: scn.hash.clone(), checks, artifacts })
}
