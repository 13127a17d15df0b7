//! Physical constants (CODATA 2018, SI units).

pub const PI: f64 = std::f64::consts::PI;
pub const TAU: f64 = std::f64::consts::TAU;

/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Fine-structure constant.
pub const ALPHA: f64 = 7.297_352_569_3e-3;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

// unit helpers
pub const NM: f64 = 1e-9;
pub const UM: f64 = 1e-6;
pub const MM: f64 = 1e-3;
pub const CM: f64 = 1e-2;
pub const US: f64 = 1e-6;
pub const MS: f64 = 1e-3;
pub const MW: f64 = 1e-3;
pub const UW: f64 = 1e-6;
pub const KHZ: f64 = 1e3;
pub const MHZ: f64 = 1e6;
