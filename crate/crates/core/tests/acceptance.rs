//! Acceptance suite: one test per criterion against the shipped fixture. Each check
//! prints a PASS/FAIL line; oracles here are computed independently of the library
//! routines they check.

use std::sync::Mutex;
use std::time::Instant;

use chiptrap::channels::{delivered_power, LossStage};
use chiptrap::consts::{MHZ, TAU, UM, US};
use chiptrap::detection::model_fidelity;
use chiptrap::photonics::{emission_angle, grating_indices, waveguide_neff};
use chiptrap::reproduce::{self as rp, Check, ProbeKind};
use chiptrap::scenario::Scenario;
use chiptrap::trap::{to_hz, ElectrodeRole};

/// Runtimes are part of the criteria, so tests in this binary run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn settle(checks: &[Check]) {
    for c in checks {
        println!("{}", c.line());
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

fn runtime(criterion: u32, start: Instant, limit_s: f64) -> Check {
    Check::at_most(criterion, "runtime s", start.elapsed().as_secs_f64(), limit_s)
}

fn poisson(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln = k as f64 * mean.ln() - mean - (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    ln.exp()
}

// oracle outputs, frozen from the first run of each oracle
const ORACLE_FIDELITY: f64 = 0.991_479_358_298_91;
const ORACLE_NULL_UM: f64 = 55.045_719_158_043;
const ORACLE_FAB_CROSSING_UM: f64 = 63.198_989_962_807;
const ORACLE_SLAB_674: f64 = 1.589_944_476_450_868;
const ORACLE_PI_TIME_US: f64 = 4.383_733_030_542;

#[test]
fn criterion_1_loss_ledger() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    // published table rows: coupling, propagation, grating, feedthrough, cooldown
    let table: [(&str, [f64; 5]); 4] = [
        ("422", [10.0, 3.0, 12.0, 3.0, 7.0]),
        ("461", [11.0, 1.5, 9.0, 3.0, 7.0]),
        ("674", [10.0, 0.4, 11.0, 3.0, 7.0]),
        ("1092", [6.0, 0.4, 10.0, 3.0, 7.0]),
    ];
    let stages = [
        LossStage::OnChipCoupling,
        LossStage::Propagation,
        LossStage::Grating,
        LossStage::FiberFeedthrough,
        LossStage::Cooldown,
    ];
    let mut checks = rp::check_loss(&scn);
    for (label, row) in table {
        let ch = scn.channel(label).expect("fixture channel");
        for (s, want) in stages.iter().zip(row) {
            checks.push(Check::abs(1, format!("{label} {} dB", s.as_str()), ch.ledger.stage_total(*s), want, 1e-12));
        }
        let oracle = ch.fiber_power * 10f64.powf(-row.iter().sum::<f64>() / 10.0);
        checks.push(Check::rel(1, format!("{label} delivered power W"), delivered_power(ch), oracle, 1e-12));
    }
    checks.push(runtime(1, t0, 1.0));
    settle(&checks);
}

/// Dark histogram by direct midpoint integration over the decay time, using the
/// closed form Pois(a) * Pois(b) = Pois(a + b).
fn dark_oracle(scn: &Scenario, len: usize) -> Vec<f64> {
    let d = &scn.detection;
    let (t, tau, bg) = (d.window, d.d_lifetime, d.background_rate);
    let ion = d.ion_rate - if d.bright_rate_includes_background { bg } else { 0.0 };
    let n = 200_000;
    let dt = t / n as f64;
    (0..len)
        .map(|k| {
            let decayed: f64 = (0..n)
                .map(|i| {
                    let s = (i as f64 + 0.5) * dt;
                    (-s / tau).exp() / tau * poisson(k, bg * t + ion * (t - s)) * dt
                })
                .sum();
            (-t / tau).exp() * poisson(k, bg * t) + decayed
        })
        .collect()
}

#[test]
fn criterion_2_detection_fidelity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let (mut checks, rep) = rp::check_detection(&scn, scn.monte_carlo_shots, scn.seed);
    checks.push(runtime(2, t0, 30.0));

    let d = &scn.detection;
    let len = 80;
    let dark = dark_oracle(&scn, len);
    let bright: Vec<f64> = (0..len).map(|k| poisson(k, d.ion_rate * d.window)).collect();
    let best = (0..len)
        .map(|th| {
            let eps_b: f64 = bright[..=th].iter().sum();
            let eps_d: f64 = dark[th + 1..].iter().sum();
            1.0 - 0.5 * (eps_b + eps_d)
        })
        .fold(0.0, f64::max);
    println!("oracle fidelity {best:.15}");
    checks.push(Check::abs(2, "oracle fidelity vs frozen", best, ORACLE_FIDELITY, 1e-12));
    checks.push(Check::abs(2, "model fidelity vs oracle", rep.fidelity.mean_fidelity, best, 1e-9));
    let tv: f64 = 0.5 * (0..len).map(|k| (rep.dark.get(k) - dark[k]).abs()).sum::<f64>();
    checks.push(Check::at_most(2, "dark histogram vs oracle (TV)", tv, 1e-9));
    settle(&checks);
}

#[test]
fn criterion_3_pi_time() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let mut checks = rp::check_pi_time(&scn).unwrap();

    // peak intensity from power and the two 1/e^2 radii at the profiling height
    let b = scn.beam(&scn.rabi_beam).unwrap();
    let s = scn.profiling.cut_height / b.direction.z;
    let radius = |w0: f64, s0: f64| {
        let zr = std::f64::consts::PI * w0 * w0 / b.wavelength;
        w0 * (1.0 + ((s - s0) / zr).powi(2)).sqrt()
    };
    let i_peak = 2.0 * b.power
        / (std::f64::consts::PI
            * radius(b.waist_focused, b.focus_distance_focused)
            * radius(b.waist_unfocused, b.focus_distance_unfocused));
    checks.push(Check::rel(3, "peak intensity vs oracle", rp::qubit_intensity(&scn).unwrap(), i_peak, 1e-9));

    // quadrupole Rabi frequency from the D5/2 decay rate: Gamma = alpha c k^5 Q^2 / 15
    let (e, hbar, c, eps0, alpha) =
        (1.602_176_634e-19, 1.054_571_817e-34, 299_792_458.0, 8.854_187_812_8e-12, 7.297_352_569_3e-3);
    let k = TAU / scn.species.qubit_wavelength;
    let q = (15.0 / (scn.species.d52_lifetime * alpha * c * k.powi(5))).sqrt();
    let e0 = (2.0 * i_peak / (c * eps0)).sqrt();
    let rabi = e * e0 * k * q / (2.0 * hbar) / 6f64.sqrt() * scn.geometry_factor;
    let t_pi = std::f64::consts::PI / rabi / US;
    println!("oracle first-principles pi time {t_pi:.12} us");
    checks.push(Check::rel(3, "oracle pi time vs frozen us", t_pi, ORACLE_PI_TIME_US, 1e-9));
    let ratio = t_pi * US / rp::PI_TIME_ANCHOR;
    checks.push(Check::at_most(3, "oracle / published pi time (factor)", ratio.max(1.0 / ratio), 2.0));
    checks.push(runtime(3, t0, 1.0));
    settle(&checks);
}

#[test]
fn criterion_4_spectroscopy() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let (mut checks, _) = rp::check_spectrum(&scn).unwrap();
    checks.push(runtime(4, t0, 10.0));

    // small-area sideband heights summed directly over the thermal distribution
    let m = &scn.motion;
    for nbar in [0.1, 0.5, 2.0] {
        let mm = chiptrap::ion::MotionalState { nbar, ..*m };
        let (rabi, t) = chiptrap::ion::thermometry_probe(&mm, rp::THERMOMETRY_AREA, rp::THERMOMETRY_TIME);
        let q = nbar / (nbar + 1.0);
        let (mut red, mut blue) = (0.0, 0.0);
        for n in 0..400 {
            let p = (1.0 - q) * q.powi(n);
            let nf = n as f64;
            red += p * (0.5 * m.lamb_dicke * rabi * nf.sqrt() * t).sin().powi(2);
            blue += p * (0.5 * m.lamb_dicke * rabi * (nf + 1.0).sqrt() * t).sin().powi(2);
        }
        let oracle = red / blue / (1.0 - red / blue);
        let got = rp::thermometry(&scn, nbar).unwrap();
        checks.push(Check::rel(4, format!("thermometry nbar {nbar} vs oracle"), got, oracle, 1e-3));
    }
    settle(&checks);
}

#[test]
fn criterion_5_profiling_equivalence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let (mut checks, cmp) = rp::check_profiles(&scn).unwrap();
    checks.push(runtime(5, t0, 30.0));
    assert_eq!(cmp.len(), ProbeKind::ALL.len());

    // 1/e^2 diameter as four standard deviations of the sampled cut
    for c in &cmp {
        let s = &c.cut.samples;
        let w: f64 = s.iter().map(|p| p.1).sum();
        let mean = s.iter().map(|p| p.0 * p.1).sum::<f64>() / w;
        let var = s.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / w;
        let d = 4.0 * var.sqrt();
        let name = format!("{} diameter vs second-moment oracle", c.kind.label());
        checks.push(Check::rel(5, name, c.profile.fit.diameter(), d, 0.03));
    }
    settle(&checks);
}

#[test]
fn criterion_6_trap() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let (mut checks, well) = rp::check_trap(&scn, scn.seed).unwrap();
    checks.push(runtime(6, t0, 60.0));

    // long symmetric rails from |x| = a to b null at sqrt(a b)
    let rail = scn
        .trap
        .patches
        .iter()
        .find(|p| p.role == ElectrodeRole::Rf && p.x1 > 0.0)
        .expect("rf rail at positive x");
    let h = (rail.x1 * rail.x2).sqrt() / UM;
    println!("oracle null height {h:.12} um");
    checks.push(Check::abs(6, "oracle null height vs frozen um", h, ORACLE_NULL_UM, 1e-9));
    let null = chiptrap::trap::null_at(&scn.trap, 0.0).unwrap();
    checks.push(Check::abs(6, "null height vs long-rail oracle um", null.position.z / UM, h, 0.5));

    // axial curvature of the total energy by central differences
    let solved = scn.trap.with_dc_voltages(&well.dc_voltages);
    let p = well.position;
    let dy = nalgebra::Vector3::new(0.0, 0.5 * UM, 0.0);
    let k = (solved.energy(&(p + dy)) + solved.energy(&(p - dy)) - 2.0 * solved.energy(&p)) / (0.25 * UM * UM);
    let f = to_hz((k / solved.ion_mass).sqrt());
    checks.push(Check::rel(6, "axial frequency by energy difference Hz", f, 1.3 * MHZ, 0.01));
    settle(&checks);
}

#[test]
fn criterion_7_ramsey_vibration() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let (mut checks, rep) = rp::check_ramsey(&scn, scn.seed).unwrap();
    checks.push(runtime(7, t0, 300.0));
    assert_eq!(rep.free.len(), 6);

    // peak acceleration from the published Doppler shift and vibration frequency
    let v = &scn.file.vibration;
    let a = v.peak_doppler_khz * 1e3 * v.qubit_wavelength_nm * 1e-9 * TAU * v.frequency_hz;
    checks.push(Check::rel(7, "a_max vs oracle m/s^2", scn.sweep.a_max, a, 1e-12));
    let shots = scn.sweep.shots;
    checks.push(Check::abs(7, "shots per point", shots as f64, 1000.0, 0.0));
    settle(&checks);
}

/// Fundamental TE index of a symmetric slab from tan(kappa t / 2) = gamma / kappa.
fn slab_te_oracle(core: f64, clad: f64, t: f64, lambda: f64) -> f64 {
    let k0 = TAU / lambda;
    let g = |n: f64| {
        let kappa = k0 * (core * core - n * n).sqrt();
        let gamma = k0 * (n * n - clad * clad).sqrt();
        (0.5 * kappa * t).tan() - gamma / kappa
    };
    let (mut lo, mut hi) = (clad + 1e-12, core - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_8_photonics() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let scn = Scenario::fixture();
    let out = rp::check_photonics(&scn, scn.seed).unwrap();
    let mut checks = out.checks.clone();
    checks.push(runtime(8, t0, 30.0));

    let st = &scn.stack;
    let slab = slab_te_oracle(st.core_index, st.clad_index, st.core_thickness, 674e-9);
    println!("oracle 674 nm slab index {slab:.15}");
    checks.push(Check::abs(8, "oracle slab index vs frozen", slab, ORACLE_SLAB_674, 1e-12));
    let m = waveguide_neff(st, 580e-9, 674e-9).unwrap();
    checks.push(Check::abs(8, "slab index vs oracle", m.slab_neff, slab, 1e-10));
    // second lateral mode cuts off at V = pi/2 in a symmetric slab
    for v in &out.modes {
        let wm = waveguide_neff(st, v.width, v.wavelength).unwrap();
        let big_v = std::f64::consts::PI * v.width / v.wavelength * (wm.slab_neff.powi(2) - st.clad_index.powi(2)).sqrt();
        let name = format!("{} single-mode verdict vs V-number", v.label);
        checks.push(Check::holds(8, name, v.single_mode == (big_v < std::f64::consts::FRAC_PI_2)));
    }

    // grating equation sin(theta) = n_eff - lambda / period, first order
    let mut angle = |beam: &str| {
        let b = scn.file.beams.iter().find(|b| b.name == beam).unwrap();
        let l = b.wavelength_nm * 1e-9;
        let g = scn.grating(&scn.channel(&b.channel).unwrap().grating).unwrap();
        let n = grating_indices(st, l, g.duty_cycle).unwrap().weighted;
        let theta = (n - l / g.period).asin();
        let lib = emission_angle(&g.reindexed(st, l).unwrap(), l, 1).unwrap();
        checks.push(Check::abs(8, format!("{beam} emission angle vs grating equation rad"), lib, theta, 1e-12));
        (theta, g.position)
    };
    let (ta, pa) = angle("674");
    let (tb, pb) = angle("422");
    let z = (pa - pb).norm() / (ta.tan() + tb.tan()) / UM;
    println!("oracle fabricated crossing {z:.12} um");
    checks.push(Check::abs(8, "oracle crossing vs frozen um", z, ORACLE_FAB_CROSSING_UM, 1e-9));
    checks.push(Check::abs(8, "fabricated crossing vs oracle um", out.crossing.fabricated.height / UM, z, 1e-6));
    settle(&checks);
}

#[test]
fn criterion_9_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let scn = Scenario::fixture();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut all_pass = true;
    for d in &dirs {
        let rep = rp::reproduce(&scn, scn.seed).unwrap();
        all_pass &= rep.passed();
        rep.write(d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut checks = vec![
        Check::holds(9, "reproduce run passes every check", all_pass),
        Check::at_least(9, "output files", names.len() as f64, 10.0),
    ];
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).unwrap();
        let b = std::fs::read(dirs[1].path().join(n)).unwrap();
        checks.push(Check::holds(9, format!("{} byte-identical", n.to_string_lossy()), a == b));
    }
    settle(&checks);
}

#[test]
fn fixture_fidelity_near_published() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let scn = Scenario::fixture();
    let f = model_fidelity(&scn.detection).mean_fidelity;
    settle(&[Check::abs(2, "fixture fidelity", f, rp::FIDELITY_ANCHOR, 0.005)]);
}
