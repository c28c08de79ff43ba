//! Unit conversions. All dynamics run in rad/ns with hbar = 1.

use std::f64::consts::PI;

/// Converts an ordinary frequency in GHz to an angular frequency in rad/ns.
#[inline]
pub fn ghz_to_rad_per_ns(f: f64) -> f64 {
    2.0 * PI * f
}

/// Inverse of [`ghz_to_rad_per_ns`].
#[inline]
pub fn rad_per_ns_to_ghz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// THz to rad/ns.
#[inline]
pub fn thz_to_rad_per_ns(f: f64) -> f64 {
    ghz_to_rad_per_ns(1000.0 * f)
}

/// Boltzmann constant over Planck constant, GHz per kelvin.
pub const GHZ_PER_KELVIN: f64 = 20.836_619_123_327_574;

/// Temperature in kelvin expressed as a frequency in GHz (k_B T / h).
#[inline]
pub fn kelvin_to_ghz(t: f64) -> f64 {
    t * GHZ_PER_KELVIN
}
