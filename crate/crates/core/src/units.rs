//! Unit conversions. Internally every rate is an angular frequency in rad/s and
//! every time is in seconds; external inputs use 2π·MHz, μs and ns.

use std::f64::consts::TAU;

/// Picoseconds per second; the click-stream tick.
pub const TICKS_PER_SECOND: f64 = 1e12;

/// A rate given as ν in MHz (i.e. ω/2π) converted to ω in rad/s.
pub fn mhz_to_rad(nu_mhz: f64) -> f64 {
    TAU * 1e6 * nu_mhz
}

pub fn rad_to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

pub fn us(t_us: f64) -> f64 {
    t_us * 1e-6
}

pub fn ns(t_ns: f64) -> f64 {
    t_ns * 1e-9
}

pub fn seconds_to_ticks(t: f64) -> u64 {
    (t * TICKS_PER_SECOND).round().max(0.0) as u64
}

pub fn ticks_to_seconds(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND
}
