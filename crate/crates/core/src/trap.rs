//! Surface-electrode trap electrostatics in the gapless-plane approximation.
//!
//! Every electrode is a rectangle in the z = 0 plane held at a fixed potential while
//! the rest of the plane is grounded. The potential of one rectangle has a closed form,
//! so fields are analytic and only second derivatives use finite differences.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::consts::{AMU, E_CHARGE, PI, TAU};
use crate::numerics::eigen::jacobi_eigen3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("point at z = {z} m is on or below the electrode plane")]
    OnSurface { z: f64 },
    #[error("RF null search did not converge: {0}")]
    NoNull(String),
    #[error("target height {0} m is not reachable")]
    Unreachable(f64),
    #[error("axial well at y = {y} m is infeasible: {reason} (condition number {condition:.3e})")]
    Infeasible { y: f64, reason: String, condition: f64 },
    #[error("invalid trap model: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectrodeRole {
    Rf,
    Dc,
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodePatch {
    pub name: String,
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub role: ElectrodeRole,
    /// DC potential, or RF amplitude, in volts.
    pub voltage: f64,
}

impl ElectrodePatch {
    pub fn new(name: &str, x: (f64, f64), y: (f64, f64), role: ElectrodeRole, voltage: f64) -> Self {
        Self { name: name.into(), x1: x.0, x2: x.1, y1: y.0, y2: y.1, role, voltage }
    }

    fn overlaps(&self, o: &ElectrodePatch) -> bool {
        self.x1 < o.x2 && o.x1 < self.x2 && self.y1 < o.y2 && o.y1 < self.y2
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { x1: self.x1 * s, x2: self.x2 * s, y1: self.y1 * s, y2: self.y2 * s, ..self.clone() }
    }
}

fn corner_term(dx: f64, dy: f64, z: f64) -> f64 {
    let r = (dx * dx + dy * dy + z * z).sqrt();
    (dx * dy / (z * r)).atan()
}

fn corner_gradient(dx: f64, dy: f64, z: f64) -> Vector3<f64> {
    let r = (dx * dx + dy * dy + z * z).sqrt();
    let ax = dx * dx + z * z;
    let ay = dy * dy + z * z;
    Vector3::new(
        z * dy / (ax * r),
        z * dx / (ay * r),
        -dx * dy * (dx * dx + dy * dy + 2.0 * z * z) / (ax * ay * r),
    )
}

fn corners(patch: &ElectrodePatch, p: &Vector3<f64>) -> [(f64, f64, f64); 4] {
    [
        (p.x - patch.x1, p.y - patch.y1, 1.0),
        (p.x - patch.x1, p.y - patch.y2, -1.0),
        (p.x - patch.x2, p.y - patch.y1, -1.0),
        (p.x - patch.x2, p.y - patch.y2, 1.0),
    ]
}

/// Potential of `patch` held at 1 V.
pub fn unit_potential(patch: &ElectrodePatch, p: &Vector3<f64>) -> f64 {
    corners(patch, p).iter().map(|&(dx, dy, s)| s * corner_term(dx, dy, p.z)).sum::<f64>() / TAU
}

/// Gradient of [`unit_potential`], V/m per volt.
pub fn unit_gradient(patch: &ElectrodePatch, p: &Vector3<f64>) -> Vector3<f64> {
    corners(patch, p)
        .iter()
        .map(|&(dx, dy, s)| s * corner_gradient(dx, dy, p.z))
        .sum::<Vector3<f64>>()
        / TAU
}

/// Potential (V) of `patch` at its own voltage.
pub fn patch_potential(patch: &ElectrodePatch, p: &Vector3<f64>) -> Result<f64, TrapError> {
    if !(p.z > 0.0) {
        return Err(TrapError::OnSurface { z: p.z });
    }
    Ok(patch.voltage * unit_potential(patch, p))
}

pub fn patch_gradient(patch: &ElectrodePatch, p: &Vector3<f64>) -> Result<Vector3<f64>, TrapError> {
    if !(p.z > 0.0) {
        return Err(TrapError::OnSurface { z: p.z });
    }
    Ok(patch.voltage * unit_gradient(patch, p))
}

/// Hessian by central differences of an analytic gradient.
pub fn hessian_fd<F: Fn(&Vector3<f64>) -> Vector3<f64>>(grad: F, p: &Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = h;
        let col = (grad(&(p + e)) - grad(&(p - e))) / (2.0 * h);
        m.set_column(j, &col);
    }
    0.5 * (m + m.transpose())
}

/// Finite-difference step for Hessians.
pub const HESSIAN_STEP: f64 = 0.1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrapModel {
    pub patches: Vec<ElectrodePatch>,
    /// Angular RF drive frequency, rad/s.
    pub rf_frequency: f64,
    /// kg
    pub ion_mass: f64,
    /// C
    pub ion_charge: f64,
    /// Uniform stray electric field, V/m.
    pub stray_field: Vector3<f64>,
}

impl TrapModel {
    pub fn new(patches: Vec<ElectrodePatch>, rf_frequency: f64) -> Self {
        Self {
            patches,
            rf_frequency,
            ion_mass: 88.0 * AMU,
            ion_charge: E_CHARGE,
            stray_field: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        if !(self.rf_frequency > 0.0) {
            return Err(TrapError::Invalid("RF frequency must be positive".into()));
        }
        if !(self.ion_mass > 0.0) {
            return Err(TrapError::Invalid("ion mass must be positive".into()));
        }
        if !self.patches.iter().any(|p| p.role == ElectrodeRole::Rf) {
            return Err(TrapError::Invalid("no RF electrode".into()));
        }
        if !self.patches.iter().any(|p| p.role == ElectrodeRole::Dc) {
            return Err(TrapError::Invalid("no DC electrode".into()));
        }
        for (i, p) in self.patches.iter().enumerate() {
            if !(p.x1 < p.x2 && p.y1 < p.y2) {
                return Err(TrapError::Invalid(format!("electrode {} has an empty rectangle", p.name)));
            }
            for q in &self.patches[i + 1..] {
                if p.overlaps(q) {
                    return Err(TrapError::Invalid(format!("electrodes {} and {} overlap", p.name, q.name)));
                }
                if p.name == q.name {
                    return Err(TrapError::Invalid(format!("duplicate electrode name {}", p.name)));
                }
            }
        }
        Ok(())
    }

    pub fn rf_patches(&self) -> impl Iterator<Item = &ElectrodePatch> {
        self.patches.iter().filter(|p| p.role == ElectrodeRole::Rf)
    }

    pub fn dc_patches(&self) -> impl Iterator<Item = &ElectrodePatch> {
        self.patches.iter().filter(|p| p.role == ElectrodeRole::Dc)
    }

    /// RF field amplitude gradient, V/m.
    pub fn rf_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rf_patches().map(|e| e.voltage * unit_gradient(e, p)).sum()
    }

    pub fn rf_potential(&self, p: &Vector3<f64>) -> f64 {
        self.rf_patches().map(|e| e.voltage * unit_potential(e, p)).sum()
    }

    pub fn dc_potential(&self, p: &Vector3<f64>) -> f64 {
        self.dc_patches().map(|e| e.voltage * unit_potential(e, p)).sum()
    }

    pub fn dc_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.dc_patches().map(|e| e.voltage * unit_gradient(e, p)).sum()
    }

    fn pseudo_prefactor(&self) -> f64 {
        self.ion_charge.powi(2) / (4.0 * self.ion_mass * self.rf_frequency.powi(2))
    }

    /// Pseudopotential energy, J.
    pub fn pseudo_energy(&self, p: &Vector3<f64>) -> f64 {
        self.pseudo_prefactor() * self.rf_gradient(p).norm_squared()
    }

    /// Gradient of the pseudopotential energy, J/m.
    pub fn pseudo_energy_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let h = hessian_fd(|q| self.rf_gradient(q), p, HESSIAN_STEP);
        2.0 * self.pseudo_prefactor() * h * self.rf_gradient(p)
    }

    /// Total ion potential energy (pseudopotential + DC + stray), J.
    pub fn energy(&self, p: &Vector3<f64>) -> f64 {
        self.pseudo_energy(p) + self.ion_charge * (self.dc_potential(p) - self.stray_field.dot(p))
    }

    pub fn energy_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pseudo_energy_gradient(p) + self.ion_charge * (self.dc_gradient(p) - self.stray_field)
    }

    pub fn energy_hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        hessian_fd(|q| self.energy_gradient(q), p, HESSIAN_STEP)
    }

    /// Largest lateral extent of the RF electrodes, used as the length scale.
    fn rf_scale(&self) -> f64 {
        self.rf_patches().map(|e| e.x1.abs().max(e.x2.abs())).fold(0.0, f64::max)
    }

    fn rf_amplitude(&self) -> f64 {
        self.rf_patches().map(|e| e.voltage.abs()).fold(0.0, f64::max)
    }

    pub fn with_dc_voltages(&self, volts: &[(String, f64)]) -> Self {
        let mut t = self.clone();
        for (name, v) in volts {
            if let Some(p) = t.patches.iter_mut().find(|p| &p.name == name) {
                p.voltage = *v;
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { patches: self.patches.iter().map(|p| p.scaled(s)).collect(), ..self.clone() }
    }
}

/// Pseudopotential in eV.
pub fn pseudopotential(trap: &TrapModel, p: &Vector3<f64>) -> Result<f64, TrapError> {
    if !(p.z > 0.0) {
        return Err(TrapError::OnSurface { z: p.z });
    }
    Ok(trap.pseudo_energy(p) / E_CHARGE)
}

/// Point of the RF null curve at axial position `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullPoint {
    pub position: Vector3<f64>,
    /// Gradient of |grad V_RF|^2 in (x, z) at the returned point, relative to
    /// |J| * amplitude / length scale.
    pub residual: f64,
    /// |grad V_RF| at the null relative to amplitude / length scale; nonzero only where
    /// the finite electrode ends leave an axial field.
    pub field: f64,
}

/// Minimizes |grad V_RF|^2 over (x, z) at fixed y by Gauss-Newton.
pub fn null_at(trap: &TrapModel, y: f64) -> Result<NullPoint, TrapError> {
    let l = trap.rf_scale();
    let amp = trap.rf_amplitude();
    if !(l > 0.0 && amp > 0.0) {
        return Err(TrapError::NoNull("no energized RF electrodes".into()));
    }
    let xc = {
        let (s, w) = trap
            .rf_patches()
            .fold((0.0, 0.0), |(s, w), e| (s + 0.5 * (e.x1 + e.x2) * (e.x2 - e.x1), w + (e.x2 - e.x1)));
        s / w
    };
    let field_scale = amp / l;
    let mut best = (f64::INFINITY, Vector2::new(xc, l));
    for k in 1..=300 {
        let z = l * 0.01 * k as f64;
        let g = trap.rf_gradient(&Vector3::new(xc, y, z)).norm();
        if g < best.0 {
            best = (g, Vector2::new(xc, z));
        }
    }
    let mut q = best.1;
    let residual = |q: &Vector2<f64>| trap.rf_gradient(&Vector3::new(q.x, y, q.y));
    for _ in 0..200 {
        let p = Vector3::new(q.x, y, q.y);
        let g = residual(&q);
        if g.norm() < 1e-12 * field_scale {
            return Ok(NullPoint { position: p, residual: 0.0, field: g.norm() / field_scale });
        }
        let h = hessian_fd(|r| trap.rf_gradient(r), &p, HESSIAN_STEP.min(1e-3 * q.y));
        let j = nalgebra::Matrix3x2::from_columns(&[h.column(0).into_owned(), h.column(2).into_owned()]);
        let jtj: Matrix2<f64> = j.transpose() * j;
        let jtg = j.transpose() * g;
        let step = jtj
            .try_inverse()
            .map(|inv| -(inv * jtg))
            .ok_or_else(|| TrapError::NoNull("singular field Jacobian".into()))?;
        let mut t = 1.0;
        let f0 = g.norm_squared();
        loop {
            let cand = q + t * step;
            if cand.y > 0.0 && residual(&cand).norm_squared() <= f0 {
                q = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                break;
            }
        }
        let stationary = jtg.norm() <= 1e-8 * j.norm() * g.norm();
        if t < 1e-10 || (t * step).norm() < 1e-15 * l || stationary {
            let p = Vector3::new(q.x, y, q.y);
            let g = residual(&q);
            let h = hessian_fd(|r| trap.rf_gradient(r), &p, HESSIAN_STEP.min(1e-3 * q.y));
            let jn = nalgebra::Matrix3x2::from_columns(&[h.column(0).into_owned(), h.column(2).into_owned()]);
            let stationarity = (jn.transpose() * g).norm() / (jn.norm() * field_scale);
            if stationarity <= 1e-8 {
                return Ok(NullPoint { position: p, residual: stationarity, field: g.norm() / field_scale });
            }
            return Err(TrapError::NoNull(format!("stalled at y = {y:e} m")));
        }
    }
    Err(TrapError::NoNull(format!("no convergence at y = {y:e} m")))
}

/// Null curve sampled at `ys`.
pub fn find_null(trap: &TrapModel, ys: &[f64]) -> Result<Vec<NullPoint>, TrapError> {
    ys.par_iter().map(|&y| null_at(trap, y)).collect()
}

/// Layout parameters of the symmetric five-wire template, in units of the null height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveWireLayout {
    /// Outer/inner RF edge ratio b/a.
    pub rail_aspect: f64,
    /// DC segment pitch along y.
    pub segment_pitch: f64,
    pub segments_per_side: usize,
    /// DC segment width in x.
    pub segment_width: f64,
    /// Half-length of the RF rails and the centre electrode along y.
    pub rail_half_length: f64,
}

impl Default for FiveWireLayout {
    fn default() -> Self {
        Self {
            rail_aspect: 3.0,
            segment_pitch: 100.0 / 55.0,
            segments_per_side: 5,
            segment_width: 3.0,
            rail_half_length: 40.0,
        }
    }
}

/// Default RF drive, 2 pi x 50 MHz.
pub const DEFAULT_RF_FREQUENCY: f64 = TAU * 50e6;
/// Radial secular frequency the RF amplitude is set for, rad/s.
pub const DEFAULT_RADIAL_FREQUENCY: f64 = TAU * 4e6;

fn five_wire(h: f64, layout: &FiveWireLayout, rf_amplitude: f64) -> Vec<ElectrodePatch> {
    let a = h / layout.rail_aspect.sqrt();
    let b = h * layout.rail_aspect.sqrt();
    let l = layout.rail_half_length * h;
    let mut patches = vec![
        ElectrodePatch::new("centre", (-a, a), (-l, l), ElectrodeRole::Ground, 0.0),
        ElectrodePatch::new("rf_left", (-b, -a), (-l, l), ElectrodeRole::Rf, rf_amplitude),
        ElectrodePatch::new("rf_right", (a, b), (-l, l), ElectrodeRole::Rf, rf_amplitude),
    ];
    let p = layout.segment_pitch * h;
    let n = layout.segments_per_side;
    let w = layout.segment_width * h;
    for side in ["left", "right"] {
        let (x1, x2) = if side == "left" { (-b - w, -b) } else { (b, b + w) };
        for k in 0..n {
            let edge = |k: usize| (k as f64 - n as f64 / 2.0) * p;
            patches.push(ElectrodePatch::new(
                &format!("dc_{side}_{}", k + 1),
                (x1, x2),
                (edge(k), edge(k + 1)),
                ElectrodeRole::Dc,
                0.0,
            ));
        }
    }
    patches
}

/// Symmetric five-wire trap whose RF null sits at `target_height` above y = 0.
/// The template is scaled once by the measured/target height ratio (Laplace scale
/// invariance), then the RF amplitude is set for the default radial frequency.
pub fn design_geometry(target_height: f64) -> Result<TrapModel, TrapError> {
    design_geometry_with(target_height, &FiveWireLayout::default())
}

pub fn design_geometry_with(target_height: f64, layout: &FiveWireLayout) -> Result<TrapModel, TrapError> {
    if !(target_height.is_finite() && target_height > 0.0 && target_height < 1.0) {
        return Err(TrapError::Unreachable(target_height));
    }
    if !(layout.rail_aspect > 1.0) {
        return Err(TrapError::Unreachable(target_height));
    }
    let template = TrapModel::new(five_wire(1.0, layout, 1.0), DEFAULT_RF_FREQUENCY);
    let measured = null_at(&template, 0.0).map_err(|_| TrapError::Unreachable(target_height))?;
    let mut trap = template.scaled(target_height / measured.position.z);
    let null = null_at(&trap, 0.0)?;
    let h = jacobi_eigen3(&hessian_fd(|q| trap.pseudo_energy_gradient(q), &null.position, HESSIAN_STEP * target_height / 55e-6));
    let radial = 0.5 * (h.values[1] + h.values[2]);
    let amp = (trap.ion_mass * DEFAULT_RADIAL_FREQUENCY.powi(2) / radial).sqrt();
    for p in trap.patches.iter_mut().filter(|p| p.role == ElectrodeRole::Rf) {
        p.voltage = amp;
    }
    Ok(trap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellSolution {
    pub position: Vector3<f64>,
    /// Angular secular frequencies ordered as the principal axes closest to x, y, z.
    pub secular_frequencies: [f64; 3],
    pub principal_axes: [Vector3<f64>; 3],
    pub dc_voltages: Vec<(String, f64)>,
    pub condition_number: f64,
}

impl WellSolution {
    pub fn axial_frequency(&self) -> f64 {
        self.secular_frequencies[1]
    }
}

/// Secular frequencies and axes at `p` from the total-energy Hessian.
pub fn secular_modes(trap: &TrapModel, p: &Vector3<f64>) -> Option<([f64; 3], [Vector3<f64>; 3])> {
    let e = jacobi_eigen3(&trap.energy_hessian(p));
    if e.values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut order = [usize::MAX; 3];
    let mut used = [false; 3];
    // assign each lab axis the remaining mode with the largest overlap, y first
    for axis in [1usize, 0, 2] {
        let k = (0..3)
            .filter(|&k| !used[k])
            .max_by(|&a, &b| e.vectors[a][axis].abs().total_cmp(&e.vectors[b][axis].abs()))
            .unwrap();
        used[k] = true;
        order[axis] = k;
    }
    Some((
        order.map(|k| (e.values[k] / trap.ion_mass).sqrt()),
        order.map(|k| e.vectors[k]),
    ))
}

/// Relative constraint residual accepted by [`solve_axial_well`].
pub const WELL_RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Minimum-norm DC voltages that put a harmonic axial well of angular frequency
/// `axial_freq` at the RF null above `target_y`, compensating any stray field.
pub fn solve_axial_well(trap: &TrapModel, target_y: f64, axial_freq: f64) -> Result<WellSolution, TrapError> {
    let dcs: Vec<&ElectrodePatch> = trap.dc_patches().collect();
    let infeasible = |reason: String, condition: f64| TrapError::Infeasible { y: target_y, reason, condition };
    if dcs.len() < 5 {
        return Err(infeasible(format!("{} DC electrodes, need at least 5", dcs.len()), f64::INFINITY));
    }
    let null = null_at(trap, target_y)?;
    let r0 = null.position;
    let l = r0.z;
    let q = trap.ion_charge;

    let n = dcs.len();
    let mut a = DMatrix::<f64>::zeros(6, n);
    for (k, e) in dcs.iter().enumerate() {
        let g = unit_gradient(e, &r0);
        let h = hessian_fd(|p| unit_gradient(e, p), &r0, HESSIAN_STEP);
        let row = [g.x * l, g.y * l, g.z * l, h[(1, 1)] * l * l, h[(0, 1)] * l * l, h[(1, 2)] * l * l];
        for (i, v) in row.iter().enumerate() {
            a[(i, k)] = *v;
        }
    }
    // targets in volts-equivalent: DC must cancel pseudo + stray gradients and supply the
    // axial curvature not already provided by the pseudopotential
    let pg = trap.pseudo_energy_gradient(&r0) / q;
    let ph = hessian_fd(|p| trap.pseudo_energy_gradient(p), &r0, HESSIAN_STEP) / q;
    let e = trap.stray_field;
    let curvature = trap.ion_mass * axial_freq * axial_freq / q;
    let b = DVector::from_vec(vec![
        (e.x - pg.x) * l,
        (e.y - pg.y) * l,
        (e.z - pg.z) * l,
        (curvature - ph[(1, 1)]) * l * l,
        -ph[(0, 1)] * l * l,
        -ph[(1, 2)] * l * l,
    ]);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let v = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|m| infeasible(m.to_string(), condition))?;
    let resid = (&a * &v - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    if !(resid <= WELL_RESIDUAL_TOLERANCE) {
        return Err(infeasible(format!("constraint residual {resid:.3e}"), condition));
    }
    let volts: Vec<(String, f64)> = dcs.iter().zip(v.iter()).map(|(e, &v)| (e.name.clone(), v)).collect();
    let solved = trap.with_dc_voltages(&volts);

    let pos = relax_equilibrium(&solved, &r0);
    let (freqs, axes) = secular_modes(&solved, &pos)
        .ok_or_else(|| infeasible("Hessian is not positive definite".into(), condition))?;
    if ((freqs[1] - axial_freq) / axial_freq).abs() > 0.01 {
        return Err(infeasible(
            format!("axial frequency {:.6e} rad/s misses target", freqs[1]),
            condition,
        ));
    }
    if (pos.y - target_y).abs() > 0.1e-6 {
        return Err(infeasible(format!("well at y = {:.4e} m", pos.y), condition));
    }
    Ok(WellSolution {
        position: pos,
        secular_frequencies: freqs,
        principal_axes: axes,
        dc_voltages: volts,
        condition_number: condition,
    })
}

/// Newton iteration from `start` to the nearby stationary point of the total energy.
pub fn relax_equilibrium(trap: &TrapModel, start: &Vector3<f64>) -> Vector3<f64> {
    let mut pos = *start;
    for _ in 0..20 {
        let g = trap.energy_gradient(&pos);
        let Some(hi) = trap.energy_hessian(&pos).try_inverse() else { break };
        let step = hi * g;
        pos -= step;
        if step.norm() < 1e-13 {
            break;
        }
    }
    pos
}

/// Independent well solutions along the axis, returned in input order.
pub fn shuttle_scan(trap: &TrapModel, ys: &[f64], axial_freq: f64) -> Result<Vec<WellSolution>, TrapError> {
    ys.par_iter().map(|&y| solve_axial_well(trap, y, axial_freq)).collect()
}

/// Mathieu q parameter of the radial confinement for a radial frequency `omega`
/// (lowest-order relation omega = q Omega / (2 sqrt 2)).
pub fn mathieu_q(trap: &TrapModel, omega: f64) -> f64 {
    2.0 * 2f64.sqrt() * omega / trap.rf_frequency
}

/// Mode frequency in Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
