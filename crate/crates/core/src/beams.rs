//! Astigmatic Gaussian beams above the chip and the two ways they are profiled:
//! a synthetic microscope focal stack with 3D reconstruction, and 1D cuts along the
//! trap axis.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::consts::PI;
use crate::numerics::fit::{gaussian_fit, line_fit, polyfit, GaussianFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid beam {name}: {what}")]
    Invalid { name: String, what: String },
}

/// Elliptical Gaussian beam. The focused axis is horizontal (parallel to the chip and
/// perpendicular to the beam); the unfocused axis completes the right-handed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamField {
    pub name: String,
    /// m
    pub wavelength: f64,
    /// W
    pub power: f64,
    /// Point on the centerline (the grating), m.
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
    /// 1/e^2 intensity radius at focus, focused axis, m.
    pub waist_focused: f64,
    /// 1/e^2 intensity radius at focus, unfocused axis, m.
    pub waist_unfocused: f64,
    /// Distance along the beam from `origin` to the focused-axis waist, m.
    pub focus_distance_focused: f64,
    /// Distance along the beam from `origin` to the unfocused-axis waist, m.
    pub focus_distance_unfocused: f64,
}

/// Horizontal axis perpendicular to `direction`; `x` for a vertical beam.
pub fn horizontal_transverse(direction: &Vector3<f64>) -> Vector3<f64> {
    let h = Vector3::z().cross(direction);
    if h.norm() < 1e-12 {
        Vector3::x()
    } else {
        h.normalize()
    }
}

impl BeamField {
    pub fn validate(&self) -> Result<(), BeamError> {
        let bad = |what: &str| BeamError::Invalid { name: self.name.clone(), what: what.into() };
        if (self.direction.norm() - 1.0).abs() > 1e-12 {
            return Err(bad("direction must be normalized"));
        }
        if !(self.waist_focused > 0.0 && self.waist_unfocused > 0.0) {
            return Err(bad("waists must be positive"));
        }
        if !(self.power >= 0.0) {
            return Err(bad("power must be non-negative"));
        }
        if !(self.wavelength > 0.0) {
            return Err(bad("wavelength must be positive"));
        }
        Ok(())
    }

    pub fn focused_axis(&self) -> Vector3<f64> {
        horizontal_transverse(&self.direction)
    }

    pub fn unfocused_axis(&self) -> Vector3<f64> {
        self.direction.cross(&self.focused_axis())
    }

    pub fn rayleigh_focused(&self) -> f64 {
        PI * self.waist_focused.powi(2) / self.wavelength
    }

    pub fn rayleigh_unfocused(&self) -> f64 {
        PI * self.waist_unfocused.powi(2) / self.wavelength
    }

    pub fn radius_focused(&self, s: f64) -> f64 {
        let r = (s - self.focus_distance_focused) / self.rayleigh_focused();
        self.waist_focused * (1.0 + r * r).sqrt()
    }

    pub fn radius_unfocused(&self, s: f64) -> f64 {
        let r = (s - self.focus_distance_unfocused) / self.rayleigh_unfocused();
        self.waist_unfocused * (1.0 + r * r).sqrt()
    }

    /// (along-beam, focused-axis, unfocused-axis) coordinates of `p`.
    pub fn local(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.direction), d.dot(&self.focused_axis()), d.dot(&self.unfocused_axis()))
    }

    /// Centerline point at distance `s` from the origin.
    pub fn centerline(&self, s: f64) -> Vector3<f64> {
        self.origin + s * self.direction
    }

    /// Centerline point at height `z` (the beam must not be horizontal).
    pub fn centerline_at_height(&self, z: f64) -> Vector3<f64> {
        self.centerline((z - self.origin.z) / self.direction.z)
    }

    pub fn intensity(&self, p: &Vector3<f64>) -> f64 {
        intensity_at(self, p)
    }

    /// Peak (on-axis) intensity at distance `s`.
    pub fn axis_intensity(&self, s: f64) -> f64 {
        2.0 * self.power / (PI * self.radius_focused(s) * self.radius_unfocused(s))
    }

    /// Emission angle from the surface normal, radians.
    pub fn polar_angle(&self) -> f64 {
        self.direction.z.clamp(-1.0, 1.0).acos()
    }
}

/// Intensity (W/m^2) of the beam at `point`.
pub fn intensity_at(beam: &BeamField, point: &Vector3<f64>) -> f64 {
    let (s, u, v) = beam.local(point);
    let wf = beam.radius_focused(s);
    let wu = beam.radius_unfocused(s);
    2.0 * beam.power / (PI * wf * wu) * (-2.0 * u * u / (wf * wf) - 2.0 * v * v / (wu * wu)).exp()
}

/// Rectangular sampling grid on a z = const plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub center: Vector2<f64>,
    pub half_width: f64,
    pub spacing: f64,
}

impl Grid {
    /// 0.5 um spacing over +-40 um around `center`.
    pub fn standard(center: Vector2<f64>) -> Self {
        Self { center, half_width: 40e-6, spacing: 0.5e-6 }
    }

    pub fn points_per_side(&self) -> usize {
        (2.0 * self.half_width / self.spacing).round() as usize + 1
    }

    pub fn xs(&self) -> Vec<f64> {
        let n = self.points_per_side();
        (0..n).map(|i| self.center.x - self.half_width + self.spacing * i as f64).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        let n = self.points_per_side();
        (0..n).map(|i| self.center.y - self.half_width + self.spacing * i as f64).collect()
    }
}

/// Intensity images on a series of heights. `slices[k][j * n + i]` is the sample at
/// `(xs[i], ys[j], heights[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalStack {
    pub heights: Vec<f64>,
    pub grid: Grid,
    pub slices: Vec<Vec<f64>>,
}

/// Heights 0..100 um in 2.5 um steps.
pub fn standard_heights() -> Vec<f64> {
    (0..=40).map(|k| 2.5e-6 * k as f64).collect()
}

pub fn synthesize_stack(beam: &BeamField, heights: &[f64], grid: Grid) -> FocalStack {
    let xs = grid.xs();
    let ys = grid.ys();
    let slices = heights
        .par_iter()
        .map(|&z| {
            let mut img = Vec::with_capacity(xs.len() * ys.len());
            for &y in &ys {
                for &x in &xs {
                    img.push(intensity_at(beam, &Vector3::new(x, y, z)));
                }
            }
            img
        })
        .collect();
    FocalStack { heights: heights.to_vec(), grid, slices }
}

/// First and second moments of one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceMoments {
    pub height: f64,
    pub power: f64,
    pub centroid: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

/// Moments inside an elliptical window of three 1/e^2 radii, iterated from a
/// half-maximum seed so additive background noise far from the spot is ignored.
pub fn slice_moments(stack: &FocalStack, k: usize) -> Option<SliceMoments> {
    let xs = stack.grid.xs();
    let ys = stack.grid.ys();
    let img = &stack.slices[k];
    let n = xs.len();
    let peak = img.iter().cloned().fold(f64::MIN, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    // `rows` and `cols` bound the pixels `include` can accept
    type Span = std::ops::Range<usize>;
    let moments = |include: &dyn Fn(f64, f64, f64) -> bool,
                   rows: Span,
                   cols: Span|
     -> Option<(f64, Vector2<f64>, Matrix2<f64>)> {
        let mut m0 = 0.0;
        let mut m1 = Vector2::zeros();
        for j in rows.clone() {
            let y = ys[j];
            for i in cols.clone() {
                let x = xs[i];
                let v = img[j * n + i];
                if include(x, y, v) {
                    m0 += v;
                    m1 += v * Vector2::new(x, y);
                }
            }
        }
        if !(m0 > 0.0) {
            return None;
        }
        let c = m1 / m0;
        let mut m2 = Matrix2::zeros();
        for j in rows {
            let y = ys[j];
            for i in cols.clone() {
                let x = xs[i];
                let v = img[j * n + i];
                if include(x, y, v) {
                    let d = Vector2::new(x, y) - c;
                    m2 += v * d * d.transpose();
                }
            }
        }
        Some((m0, c, m2 / m0))
    };

    let (_, mut c, mut cov) = moments(&|_, _, v| v >= 0.5 * peak, 0..ys.len(), 0..n)?;
    // the half-maximum core underestimates the spread: a Gaussian clipped at 1/2 has
    // variance reduced by roughly 3x, so start wide
    cov *= 3.0;
    let dx = stack.grid.spacing;
    cov += Matrix2::identity() * dx * dx;
    let mut power = 0.0;
    for _ in 0..30 {
        let inv = cov.try_inverse()?;
        let span = |lo: f64, center: f64, half: f64, len: usize| -> Span {
            let a = ((center - half - lo) / dx).floor().max(0.0) as usize;
            let b = (((center + half - lo) / dx).ceil() + 1.0).max(0.0) as usize;
            a.min(len)..b.min(len)
        };
        let rows = span(ys[0], c.y, 6.0 * cov[(1, 1)].sqrt(), ys.len());
        let cols = span(xs[0], c.x, 6.0 * cov[(0, 0)].sqrt(), n);
        let (m0, c_new, cov_new) = moments(
            &|x, y, _| {
                let d = Vector2::new(x, y) - c;
                // (d^T cov^-1 d) <= 36  <=>  within 3 w along every axis (w = 2 sigma)
                (d.transpose() * inv * d)[(0, 0)] <= 36.0
            },
            rows,
            cols,
        )?;
        let shift = (c_new - c).norm();
        let change = (cov_new - cov).norm() / cov.norm();
        c = c_new;
        cov = cov_new;
        power = m0;
        if shift < 1e-6 * dx && change < 1e-9 {
            break;
        }
        if cov.determinant() <= 0.0 {
            return None;
        }
    }
    let area = stack.grid.spacing * stack.grid.spacing;
    Some(SliceMoments { height: stack.heights[k], power: power * area, centroid: c, covariance: cov })
}

/// Beam parameters recovered from a focal stack.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamReconstruction {
    pub direction: Vector3<f64>,
    /// Polar angle from the surface normal, radians.
    pub emission_angle: f64,
    /// Centerline point at z = 0, m.
    pub origin: Vector3<f64>,
    pub waist_focused: f64,
    pub waist_unfocused: f64,
    pub focus_distance_focused: f64,
    pub focus_distance_unfocused: f64,
    pub focus_height_focused: f64,
    pub focus_height_unfocused: f64,
    /// RMS distance of the slice centroids from the fitted centerline, m.
    pub centroid_residual: f64,
    /// RMS relative residual of the squared-width hyperbola fits.
    pub width_residual: f64,
}

fn hyperbola(s: &[f64], w2: &[f64]) -> Result<(f64, f64, f64), BeamError> {
    let c = polyfit(s, w2, 2)
        .ok_or_else(|| BeamError::DegenerateFit("width fit is singular".into()))?;
    let scale = w2.iter().cloned().fold(0.0, f64::max);
    let span = s.iter().cloned().fold(f64::MIN, f64::max) - s.iter().cloned().fold(f64::MAX, f64::min);
    // curvature must be resolvable against the widths themselves
    if !(c[2] * span * span > 1e-6 * scale) {
        return Err(BeamError::DegenerateFit("beam width does not vary across the stack".into()));
    }
    let s0 = -c[1] / (2.0 * c[2]);
    let w0_sq = c[0] - c[1] * c[1] / (4.0 * c[2]);
    if !(w0_sq > 0.0) {
        return Err(BeamError::DegenerateFit("fitted waist is not positive".into()));
    }
    let rms = (s
        .iter()
        .zip(w2)
        .map(|(&si, &wi)| {
            let model = c[0] + c[1] * si + c[2] * si * si;
            ((wi - model) / model).powi(2)
        })
        .sum::<f64>()
        / s.len() as f64)
        .sqrt();
    Ok((w0_sq.sqrt(), s0, rms))
}

/// Centroid line fit gives the direction; second moments projected on the beam's
/// horizontal and tilted axes give widths, and a hyperbola in along-beam distance gives
/// each axis's waist and focus.
pub fn reconstruct_beam(stack: &FocalStack) -> Result<BeamReconstruction, BeamError> {
    if stack.heights.len() < 3 {
        return Err(BeamError::DegenerateFit(format!(
            "need at least 3 slices, got {}",
            stack.heights.len()
        )));
    }
    let moments: Vec<SliceMoments> = (0..stack.heights.len())
        .into_par_iter()
        .filter_map(|k| slice_moments(stack, k))
        .collect();
    if moments.len() < 3 {
        return Err(BeamError::DegenerateFit("fewer than 3 slices contain the beam".into()));
    }
    let z: Vec<f64> = moments.iter().map(|m| m.height).collect();
    let cx: Vec<f64> = moments.iter().map(|m| m.centroid.x).collect();
    let cy: Vec<f64> = moments.iter().map(|m| m.centroid.y).collect();
    let ones = vec![1.0; z.len()];
    let fx = line_fit(&z, &cx, &ones)
        .ok_or_else(|| BeamError::DegenerateFit("slice heights are degenerate".into()))?;
    let fy = line_fit(&z, &cy, &ones)
        .ok_or_else(|| BeamError::DegenerateFit("slice heights are degenerate".into()))?;
    let direction = Vector3::new(fx.slope, fy.slope, 1.0).normalize();
    let origin = Vector3::new(fx.intercept, fy.intercept, 0.0);
    let centroid_residual = (moments
        .iter()
        .map(|m| {
            let line = Vector2::new(fx.intercept + fx.slope * m.height, fy.intercept + fy.slope * m.height);
            (m.centroid - line).norm_squared()
        })
        .sum::<f64>()
        / moments.len() as f64)
        .sqrt();

    let emission_angle = direction.z.acos();
    let cos_t = direction.z;
    let h3 = horizontal_transverse(&direction);
    let h = Vector2::new(h3.x, h3.y);
    let a = Vector2::new(-h.y, h.x);

    let s: Vec<f64> = z.iter().map(|&zi| zi / cos_t).collect();
    let wf2: Vec<f64> = moments.iter().map(|m| 4.0 * (h.transpose() * m.covariance * h)[(0, 0)]).collect();
    let wu2: Vec<f64> = moments
        .iter()
        .map(|m| 4.0 * (a.transpose() * m.covariance * a)[(0, 0)] * cos_t * cos_t)
        .collect();
    let (wf0, sf, rf) = hyperbola(&s, &wf2)?;
    let (wu0, su, ru) = hyperbola(&s, &wu2)?;
    Ok(BeamReconstruction {
        direction,
        emission_angle,
        origin,
        waist_focused: wf0,
        waist_unfocused: wu0,
        focus_distance_focused: sf,
        focus_distance_unfocused: su,
        focus_height_focused: sf * cos_t,
        focus_height_unfocused: su * cos_t,
        centroid_residual,
        width_residual: rf.max(ru),
    })
}

/// Sampling line parallel to the trap axis (y) at fixed x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLine {
    pub x: f64,
    pub y_start: f64,
    pub y_stop: f64,
    pub step: f64,
}

impl Default for AxisLine {
    /// x = 0, y from -40 to +40 um in 0.25 um steps.
    fn default() -> Self {
        Self { x: 0.0, y_start: -40e-6, y_stop: 40e-6, step: 0.25e-6 }
    }
}

impl AxisLine {
    pub fn ys(&self) -> Vec<f64> {
        crate::numerics::arange_inclusive(self.y_start, self.y_stop, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxialCut {
    pub height: f64,
    /// (y, intensity) samples, m and W/m^2.
    pub samples: Vec<(f64, f64)>,
    /// Gaussian fit in metres.
    pub fit: GaussianFit,
}

/// Fit a Gaussian to (position, signal) samples given in metres; the fit runs in um.
pub fn fit_profile(samples: &[(f64, f64)]) -> Option<GaussianFit> {
    let x: Vec<f64> = samples.iter().map(|s| s.0 * 1e6).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let f = gaussian_fit(&x, &y)?;
    Some(GaussianFit { center: f.center * 1e-6, radius: f.radius * 1e-6, ..f })
}

pub fn axial_cut(beam: &BeamField, height: f64, line: AxisLine) -> Result<AxialCut, BeamError> {
    let samples: Vec<(f64, f64)> = line
        .ys()
        .into_iter()
        .map(|y| (y, intensity_at(beam, &Vector3::new(line.x, y, height))))
        .collect();
    let fit = fit_profile(&samples)
        .ok_or_else(|| BeamError::DegenerateFit(format!("no signal along the cut of {}", beam.name)))?;
    Ok(AxialCut { height, samples, fit })
}
