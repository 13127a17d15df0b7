//! Waveguide mode indices and grating-coupler emission geometry.
//!
//! Mode indices come from the symmetric-slab eigenvalue equation, applied twice in the
//! effective-index method (thickness first, then width). Grating emission follows first-order
//! phase matching `n_eff - m * lambda / period = sin(theta)` in the vacuum above the chip;
//! the cladding refraction cancels out of that product.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotonicsError {
    #[error("no guided mode of order {order} at {wavelength_nm:.1} nm (below cutoff)")]
    NoGuidedMode { order: u32, wavelength_nm: f64 },
    #[error("diffraction order {order} is evanescent (sin theta = {sin_theta:.4})")]
    Evanescent { order: u32, sin_theta: f64 },
    #[error("target emission angle {angle_deg:.3} deg is unreachable with n_eff = {n_eff:.4}")]
    Unreachable { angle_deg: f64, n_eff: f64 },
    #[error("beam centerlines do not converge above the chip")]
    NonIntersecting,
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    Te,
    Tm,
}

/// Reference wavelength at which the material indices are specified.
pub const INDEX_REFERENCE_WAVELENGTH: f64 = 633e-9;

/// Core/cladding slab with a partial grating etch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStack {
    pub core_index: f64,
    pub clad_index: f64,
    /// m
    pub core_thickness: f64,
    /// m
    pub etch_depth: f64,
    /// Linear material dispersion dn/dlambda of the core, per m. Zero holds the index constant.
    pub core_dispersion: f64,
    /// Linear material dispersion of the cladding, per m.
    pub clad_dispersion: f64,
}

impl LayerStack {
    pub fn new(core_index: f64, clad_index: f64, core_thickness: f64, etch_depth: f64) -> Self {
        Self {
            core_index,
            clad_index,
            core_thickness,
            etch_depth,
            core_dispersion: 0.0,
            clad_dispersion: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhotonicsError> {
        if !(self.core_index > self.clad_index && self.clad_index >= 1.0) {
            return Err(PhotonicsError::InvalidStack(
                "need core_index > clad_index >= 1".into(),
            ));
        }
        if !(self.core_thickness > 0.0) {
            return Err(PhotonicsError::InvalidStack("core thickness must be positive".into()));
        }
        if !(self.etch_depth >= 0.0 && self.etch_depth <= self.core_thickness) {
            return Err(PhotonicsError::InvalidStack(
                "etch depth must lie in [0, core thickness]".into(),
            ));
        }
        Ok(())
    }

    pub fn core_index_at(&self, wavelength: f64) -> f64 {
        self.core_index + self.core_dispersion * (wavelength - INDEX_REFERENCE_WAVELENGTH)
    }

    pub fn clad_index_at(&self, wavelength: f64) -> f64 {
        self.clad_index + self.clad_dispersion * (wavelength - INDEX_REFERENCE_WAVELENGTH)
    }

    /// Same stack with the core index shifted by `delta`.
    pub fn with_core_offset(&self, delta: f64) -> Self {
        Self { core_index: self.core_index + delta, ..*self }
    }
}

/// Phase form of the symmetric-slab mode condition,
/// `kappa t - m pi - 2 atan(r gamma / kappa)`, with `r = 1` (TE) or `(n1/n2)^2` (TM).
/// Strictly decreasing in `n` on `(clad, core)`; its root is the mode index.
pub fn slab_dispersion_residual(
    core: f64,
    clad: f64,
    thickness: f64,
    wavelength: f64,
    pol: Polarization,
    order: u32,
    n: f64,
) -> f64 {
    let k0 = std::f64::consts::TAU / wavelength;
    let kappa = k0 * (core * core - n * n).max(0.0).sqrt();
    let gamma = k0 * (n * n - clad * clad).max(0.0).sqrt();
    let ratio = match pol {
        Polarization::Te => 1.0,
        Polarization::Tm => (core * core) / (clad * clad),
    };
    let boundary = if kappa == 0.0 {
        std::f64::consts::PI
    } else {
        2.0 * (ratio * gamma / kappa).atan()
    };
    kappa * thickness - order as f64 * std::f64::consts::PI - boundary
}

/// Effective index of slab mode `order` (0 = fundamental) for explicit indices.
pub fn slab_mode_index(
    core: f64,
    clad: f64,
    thickness: f64,
    wavelength: f64,
    pol: Polarization,
    order: u32,
) -> Result<f64, PhotonicsError> {
    let f = |n: f64| slab_dispersion_residual(core, clad, thickness, wavelength, pol, order, n);
    let no_mode = PhotonicsError::NoGuidedMode { order, wavelength_nm: wavelength * 1e9 };
    if !(thickness > 0.0) || f(clad) <= 0.0 {
        return Err(no_mode);
    }
    bisect(f, clad, core, 1e-15).ok_or(no_mode)
}

/// Fundamental-mode effective index of the stack's core slab at a given thickness.
pub fn slab_neff(
    stack: &LayerStack,
    wavelength: f64,
    thickness: f64,
    pol: Polarization,
) -> Result<f64, PhotonicsError> {
    slab_mode_index(
        stack.core_index_at(wavelength),
        stack.clad_index_at(wavelength),
        thickness,
        wavelength,
        pol,
        0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideMode {
    /// Quasi-TE fundamental-mode index of the channel waveguide.
    pub neff: f64,
    /// Index of the vertical slab used as the lateral core.
    pub slab_neff: f64,
    /// No second lateral mode is guided.
    pub single_mode: bool,
}

/// Effective-index method for a rectangular channel guide of the given width.
///
/// Quasi-TE light is polarized in-plane: TE in the vertical slab, TM in the lateral slab.
pub fn waveguide_neff(
    stack: &LayerStack,
    width: f64,
    wavelength: f64,
) -> Result<WaveguideMode, PhotonicsError> {
    let slab = slab_neff(stack, wavelength, stack.core_thickness, Polarization::Te)?;
    let clad = stack.clad_index_at(wavelength);
    let neff = slab_mode_index(slab, clad, width, wavelength, Polarization::Tm, 0)?;
    let single_mode = slab_mode_index(slab, clad, width, wavelength, Polarization::Tm, 1).is_err();
    Ok(WaveguideMode { neff, slab_neff: slab, single_mode })
}

/// Tooth, gap and duty-weighted effective indices of a partially etched grating region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingIndices {
    pub tooth: f64,
    pub gap: f64,
    pub weighted: f64,
}

pub fn grating_indices(
    stack: &LayerStack,
    wavelength: f64,
    duty_cycle: f64,
) -> Result<GratingIndices, PhotonicsError> {
    let tooth = slab_neff(stack, wavelength, stack.core_thickness, Polarization::Te)?;
    let remaining = stack.core_thickness - stack.etch_depth;
    let gap = if remaining > 0.0 {
        slab_neff(stack, wavelength, remaining, Polarization::Te)?
    } else {
        stack.clad_index_at(wavelength)
    };
    Ok(GratingIndices { tooth, gap, weighted: duty_cycle * tooth + (1.0 - duty_cycle) * gap })
}

/// Grating coupler geometry and indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingSpec {
    pub name: String,
    /// m
    pub period: f64,
    pub n_eff_tooth: f64,
    pub n_eff_gap: f64,
    /// Fraction of each period occupied by unetched tooth.
    pub duty_cycle: f64,
    /// Width of the taper at the grating, m.
    pub emitter_width: f64,
    /// Transverse focal length set by the tooth curvature, m.
    pub transverse_focal_length: f64,
    /// Grating centre on the chip surface (z = 0), m.
    pub position: Vector3<f64>,
    /// In-plane unit vector along the guided propagation direction.
    pub propagation_azimuth: Vector2<f64>,
}

impl GratingSpec {
    pub fn n_eff_grating(&self) -> f64 {
        self.duty_cycle * self.n_eff_tooth + (1.0 - self.duty_cycle) * self.n_eff_gap
    }

    pub fn validate(&self, stack: &LayerStack) -> Result<(), PhotonicsError> {
        let n = self.n_eff_grating();
        let bad = |what: &str| PhotonicsError::InvalidStack(format!("grating {}: {what}", self.name));
        if !(n > 1.0 && n < stack.core_index) {
            return Err(bad("effective index must lie in (1, core index)"));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(bad("duty cycle must lie in (0, 1)"));
        }
        if !(self.period > 0.0) {
            return Err(bad("period must be positive"));
        }
        if (self.propagation_azimuth.norm() - 1.0).abs() > 1e-9 {
            return Err(bad("propagation azimuth must be a unit vector"));
        }
        Ok(())
    }

    /// Copy with both indices shifted by `delta` (fabrication index error).
    pub fn with_index_offset(&self, delta: f64) -> Self {
        Self {
            n_eff_tooth: self.n_eff_tooth + delta,
            n_eff_gap: self.n_eff_gap + delta,
            ..self.clone()
        }
    }

    /// Copy with indices recomputed from `stack` at `wavelength`.
    pub fn reindexed(&self, stack: &LayerStack, wavelength: f64) -> Result<Self, PhotonicsError> {
        let idx = grating_indices(stack, wavelength, self.duty_cycle)?;
        Ok(Self { n_eff_tooth: idx.tooth, n_eff_gap: idx.gap, ..self.clone() })
    }

    /// Unit centerline direction of diffraction order `order` at `wavelength`.
    pub fn beam_direction(&self, wavelength: f64, order: u32) -> Result<Vector3<f64>, PhotonicsError> {
        let theta = emission_angle(self, wavelength, order)?;
        Ok(direction_from_angle(self.propagation_azimuth, theta))
    }
}

/// Beam direction for a polar angle `theta` (from the surface normal, positive along
/// `azimuth`).
pub fn direction_from_angle(azimuth: Vector2<f64>, theta: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    Vector3::new(s * azimuth.x, s * azimuth.y, c)
}

/// `n_eff - m lambda / period`, the sine of the vacuum emission angle.
pub fn phase_matched_sine(n_eff: f64, period: f64, wavelength: f64, order: u32) -> f64 {
    n_eff - order as f64 * wavelength / period
}

/// Vacuum emission angle (radians from the normal, positive = forward) of order `order`.
pub fn emission_angle(g: &GratingSpec, wavelength: f64, order: u32) -> Result<f64, PhotonicsError> {
    let s = phase_matched_sine(g.n_eff_grating(), g.period, wavelength, order);
    if !(s.abs() <= 1.0) {
        return Err(PhotonicsError::Evanescent { order, sin_theta: s });
    }
    Ok(s.asin())
}

/// Grating period that emits first order at `target_angle` (radians).
pub fn design_period(n_eff: f64, wavelength: f64, target_angle: f64) -> Result<f64, PhotonicsError> {
    design_period_order(n_eff, wavelength, target_angle, 1)
}

pub fn design_period_order(
    n_eff: f64,
    wavelength: f64,
    target_angle: f64,
    order: u32,
) -> Result<f64, PhotonicsError> {
    let s = target_angle.sin();
    let denom = n_eff - s;
    if !(target_angle.abs() <= std::f64::consts::FRAC_PI_2) || !(denom > 0.0) || order == 0 {
        return Err(PhotonicsError::Unreachable { angle_deg: target_angle.to_degrees(), n_eff });
    }
    Ok(order as f64 * wavelength / denom)
}

/// All orders `m >= 1` that radiate into the vacuum, with their angles.
pub fn diffraction_orders(g: &GratingSpec, wavelength: f64) -> Vec<(u32, f64)> {
    let n = g.n_eff_grating();
    let mut out = Vec::new();
    let mut m = 1u32;
    loop {
        let s = phase_matched_sine(n, g.period, wavelength, m);
        if s < -1.0 {
            break;
        }
        if s <= 1.0 {
            out.push((m, s.asin()));
        }
        m += 1;
    }
    out
}

/// Crossing of two grating beams in the ray picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    /// Height of the closest-approach midpoint above the chip, m.
    pub height: f64,
    pub point: Vector3<f64>,
    /// Closest distance between the two centerlines, m.
    pub miss_distance: f64,
    /// d(height)/d(index_error), m per unit index.
    pub dz_dn: f64,
}

fn ray_crossing(
    pa: &Vector3<f64>,
    da: &Vector3<f64>,
    pb: &Vector3<f64>,
    db: &Vector3<f64>,
) -> Result<(Vector3<f64>, f64), PhotonicsError> {
    let w0 = pa - pb;
    let a = da.dot(da);
    let b = da.dot(db);
    let c = db.dot(db);
    let d = da.dot(&w0);
    let e = db.dot(&w0);
    let denom = a * c - b * b;
    if denom <= 1e-14 {
        return Err(PhotonicsError::NonIntersecting);
    }
    let t = (b * e - c * d) / denom;
    let u = (a * e - b * d) / denom;
    if t <= 0.0 || u <= 0.0 {
        return Err(PhotonicsError::NonIntersecting);
    }
    let qa = pa + t * da;
    let qb = pb + u * db;
    let mid = 0.5 * (qa + qb);
    if mid.z <= 0.0 {
        return Err(PhotonicsError::NonIntersecting);
    }
    Ok((mid, (qa - qb).norm()))
}

fn crossing_for_offset(
    ga: &GratingSpec,
    gb: &GratingSpec,
    wavelength_a: f64,
    wavelength_b: f64,
    index_error: f64,
) -> Result<(Vector3<f64>, f64), PhotonicsError> {
    let da = ga.with_index_offset(index_error).beam_direction(wavelength_a, 1)?;
    let db = gb.with_index_offset(index_error).beam_direction(wavelength_b, 1)?;
    ray_crossing(&ga.position, &da, &gb.position, &db)
}

/// Height where the first-order centerlines of two gratings cross, with both effective
/// indices shifted by `index_error`.
pub fn intersection_height(
    ga: &GratingSpec,
    gb: &GratingSpec,
    wavelength_a: f64,
    wavelength_b: f64,
    index_error: f64,
) -> Result<Intersection, PhotonicsError> {
    let (point, miss) = crossing_for_offset(ga, gb, wavelength_a, wavelength_b, index_error)?;
    let h = 1e-6;
    let up = crossing_for_offset(ga, gb, wavelength_a, wavelength_b, index_error + h)?.0.z;
    let down = crossing_for_offset(ga, gb, wavelength_a, wavelength_b, index_error - h)?.0.z;
    Ok(Intersection { height: point.z, point, miss_distance: miss, dz_dn: (up - down) / (2.0 * h) })
}

/// First-order polar angle that sends a beam from `origin` through `target`, and the
/// in-plane azimuth it must propagate along.
pub fn aim(origin: &Vector3<f64>, target: &Vector3<f64>) -> (f64, Vector2<f64>) {
    let d = target - origin;
    let horizontal = Vector2::new(d.x, d.y);
    let r = horizontal.norm();
    let azimuth = if r > 0.0 { horizontal / r } else { Vector2::new(1.0, 0.0) };
    ((r).atan2(d.z), azimuth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::NM;
    use proptest::prelude::*;

    fn stack() -> LayerStack {
        LayerStack::new(1.89, 1.5, 100.0 * NM, 40.0 * NM)
    }

    /// Dense-grid sign-change search, independent of the bisection path.
    fn grid_root(core: f64, clad: f64, t: f64, lambda: f64, pol: Polarization) -> Option<f64> {
        let n = 200_000;
        let f = |x: f64| slab_dispersion_residual(core, clad, t, lambda, pol, 0, x);
        let mut prev_x = clad;
        let mut prev = f(clad);
        for i in 1..=n {
            let x = clad + (core - clad) * i as f64 / n as f64;
            let v = f(x);
            if prev > 0.0 && v <= 0.0 {
                // linear interpolation within the cell
                return Some(prev_x + (x - prev_x) * prev / (prev - v));
            }
            prev_x = x;
            prev = v;
        }
        None
    }

    #[test]
    fn thick_slab_approaches_core_index() {
        let n = slab_neff(&stack(), 633.0 * NM, 10_000.0 * NM, Polarization::Te).unwrap();
        assert!((n - 1.89).abs() < 1e-3, "{n}");
    }

    #[test]
    fn thin_slab_matches_grid_oracle() {
        for pol in [Polarization::Te, Polarization::Tm] {
            let n = slab_neff(&stack(), 633.0 * NM, 100.0 * NM, pol).unwrap();
            let oracle = grid_root(1.89, 1.5, 100.0 * NM, 633.0 * NM, pol).unwrap();
            assert!(n > 1.5 && n < 1.89);
            assert!((n - oracle).abs() < 1e-6, "{n} vs {oracle}");
            let r = slab_dispersion_residual(1.89, 1.5, 100.0 * NM, 633.0 * NM, pol, 0, n);
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn longer_wavelength_lower_index() {
        let a = slab_neff(&stack(), 633.0 * NM, 100.0 * NM, Polarization::Te).unwrap();
        let b = slab_neff(&stack(), 1092.0 * NM, 100.0 * NM, Polarization::Te).unwrap();
        assert!(b < a);
    }

    #[test]
    fn higher_order_cutoff() {
        let err = slab_mode_index(1.89, 1.5, 100.0 * NM, 633.0 * NM, Polarization::Te, 1);
        assert!(matches!(err, Err(PhotonicsError::NoGuidedMode { order: 1, .. })));
    }

    #[test]
    fn single_mode_verdicts() {
        let s = stack();
        assert!(waveguide_neff(&s, 250.0 * NM, 405.0 * NM).unwrap().single_mode);
        assert!(waveguide_neff(&s, 1100.0 * NM, 1092.0 * NM).unwrap().single_mode);
        assert!(!waveguide_neff(&s, 1100.0 * NM, 405.0 * NM).unwrap().single_mode);
    }

    #[test]
    fn partial_etch_reduces_contrast() {
        let partial = grating_indices(&stack(), 674.0 * NM, 0.5).unwrap();
        let full = grating_indices(&LayerStack { etch_depth: 100.0 * NM, ..stack() }, 674.0 * NM, 0.5)
            .unwrap();
        assert!(partial.weighted > partial.gap && partial.weighted < partial.tooth);
        assert!((partial.tooth - partial.gap).abs() < (full.tooth - full.gap).abs());
    }

    fn grating(n_eff: f64, period: f64) -> GratingSpec {
        GratingSpec {
            name: "g".into(),
            period,
            n_eff_tooth: n_eff,
            n_eff_gap: n_eff,
            duty_cycle: 0.5,
            emitter_width: 18e-6,
            transverse_focal_length: 60e-6,
            position: Vector3::zeros(),
            propagation_azimuth: Vector2::new(1.0, 0.0),
        }
    }

    #[test]
    fn vertical_emission() {
        let g = grating(1.7, 674.0 * NM / 1.7);
        assert!(emission_angle(&g, 674.0 * NM, 1).unwrap().abs() < 1e-12);
        let p = design_period(1.7, 674.0 * NM, 0.0).unwrap();
        assert!((p - 674.0 * NM / 1.7).abs() < 1e-18);
    }

    #[test]
    fn design_round_trip_35_degrees() {
        let target = 35f64.to_radians();
        let p = design_period(1.7, 674.0 * NM, target).unwrap();
        let theta = emission_angle(&grating(1.7, p), 674.0 * NM, 1).unwrap();
        assert!((theta.to_degrees() - 35.0).abs() < 1e-9);
    }

    #[test]
    fn shared_grating_separates_wavelengths() {
        let p = design_period(1.55, 1092.0 * NM, 40f64.to_radians()).unwrap();
        let g = grating(1.55, p);
        let a = emission_angle(&g, 1033.0 * NM, 1).unwrap();
        let b = emission_angle(&g, 1092.0 * NM, 1).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn index_offset_moves_angle_monotonically() {
        let p = design_period(1.7, 674.0 * NM, 35f64.to_radians()).unwrap();
        let g = grating(1.7, p);
        let mut last = emission_angle(&g, 674.0 * NM, 1).unwrap();
        for k in 1..=5 {
            let th = emission_angle(&g.with_index_offset(0.01 * k as f64), 674.0 * NM, 1).unwrap();
            assert!(th > last);
            last = th;
        }
    }

    #[test]
    fn orders_enumeration() {
        let lambda = 674.0 * NM;
        let n = 1.7;
        assert!(diffraction_orders(&grating(n, 0.9 * lambda / (n + 1.0)), lambda).is_empty());
        assert!(diffraction_orders(&grating(n, 5.0 * lambda / n), lambda).len() >= 2);
        let p = design_period(n, lambda, 35f64.to_radians()).unwrap();
        assert_eq!(diffraction_orders(&grating(n, p), lambda)[0].0, 1);
    }

    #[test]
    fn evanescent_order_errors() {
        let g = grating(1.7, 0.3 * 674.0 * NM);
        assert!(matches!(emission_angle(&g, 674.0 * NM, 1), Err(PhotonicsError::Evanescent { .. })));
    }

    fn opposed_pair(height: f64, sep: f64) -> (GratingSpec, GratingSpec) {
        let lambda = 674.0 * NM;
        let target = Vector3::new(0.0, 0.0, height);
        let mut a = grating(1.7, 1.0);
        a.position = Vector3::new(-sep, 0.0, 0.0);
        let (th, az) = aim(&a.position, &target);
        a.propagation_azimuth = az;
        a.period = design_period(1.7, lambda, th).unwrap();
        let mut b = a.clone();
        b.position = Vector3::new(sep, 0.0, 0.0);
        b.propagation_azimuth = -az;
        (a, b)
    }

    #[test]
    fn symmetric_pair_crosses_at_design_height() {
        let (a, b) = opposed_pair(55e-6, 60e-6);
        let x = intersection_height(&a, &b, 674.0 * NM, 674.0 * NM, 0.0).unwrap();
        assert!((x.height - 55e-6).abs() < 1e-9 * 55e-6);
        // lower effective index tilts both beams toward the normal: crossing rises
        assert!(x.dz_dn < 0.0);
        let lower = intersection_height(&a, &b, 674.0 * NM, 674.0 * NM, -0.02).unwrap();
        assert!(lower.height > x.height);
    }

    #[test]
    fn tilt_perturbation_matches_ray_geometry() {
        let (a, b) = opposed_pair(55e-6, 60e-6);
        let lambda = 674.0 * NM;
        let th_a = emission_angle(&a, lambda, 1).unwrap();
        let perturbed_th = th_a + 1f64.to_radians();
        let mut a2 = a.clone();
        a2.period = design_period(a.n_eff_grating(), lambda, perturbed_th).unwrap();
        let z = intersection_height(&a2, &b, lambda, lambda, 0.0).unwrap().height;
        // two coplanar rays from x = -s and x = +s meet where z (tan A + tan B) = 2 s
        let th_b = emission_angle(&b, lambda, 1).unwrap();
        let oracle = 2.0 * 60e-6 / (perturbed_th.tan() + th_b.tan());
        assert!(((z - oracle) / oracle).abs() < 0.01);
        assert!((z - 55e-6).abs() > 1e-7);
    }

    #[test]
    fn diverging_rays_error() {
        let (mut a, mut b) = opposed_pair(55e-6, 60e-6);
        a.propagation_azimuth = -a.propagation_azimuth;
        b.propagation_azimuth = -b.propagation_azimuth;
        assert!(matches!(
            intersection_height(&a, &b, 674.0 * NM, 674.0 * NM, 0.0),
            Err(PhotonicsError::NonIntersecting)
        ));
    }

    proptest! {
        #[test]
        fn phase_matching_residual(n in 1.45f64..1.85, lam in 400.0f64..1100.0, deg in -60.0f64..70.0) {
            let lambda = lam * NM;
            let th = deg.to_radians();
            let p = design_period(n, lambda, th).unwrap();
            let g = grating(n, p);
            let got = emission_angle(&g, lambda, 1).unwrap();
            prop_assert!((phase_matched_sine(n, p, lambda, 1) - got.sin()).abs() < 1e-10);
            prop_assert!(((got - th) / th.abs().max(1e-3)).abs() < 1e-9);
        }

        #[test]
        fn angle_monotone_in_wavelength(n in 1.5f64..1.8, lam in 400.0f64..1000.0) {
            let p = design_period(n, lam * NM, 0.3).unwrap();
            let g = grating(n, p);
            let a = emission_angle(&g, lam * NM, 1);
            let b = emission_angle(&g, (lam + 1.0) * NM, 1);
            if let (Ok(a), Ok(b)) = (a, b) { prop_assert!(b < a); }
        }

        #[test]
        fn slab_index_bounded(t in 20.0f64..2000.0, lam in 380.0f64..1100.0) {
            let n = slab_neff(&stack(), lam * NM, t * NM, Polarization::Te).unwrap();
            prop_assert!(n > 1.5 && n < 1.89);
        }
    }
}
