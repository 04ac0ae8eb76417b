//! Unit conversions at the I/O boundary.
//!
//! Everything inside the crate is angular frequency in rad/s and time in
//! seconds with ħ = 1. Configuration files and CSV outputs use ordinary
//! frequency (GHz, MHz) and ns/µs.

use std::f64::consts::TAU;

pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

pub fn khz(f: f64) -> f64 {
    TAU * f * 1e3
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / TAU / 1e9
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

pub fn ns(t: f64) -> f64 {
    t * 1e-9
}

pub fn us(t: f64) -> f64 {
    t * 1e-6
}

pub fn to_ns(t: f64) -> f64 {
    t * 1e9
}

pub fn to_us(t: f64) -> f64 {
    t * 1e6
}
