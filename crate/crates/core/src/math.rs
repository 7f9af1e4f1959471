//! Thin wrappers over `libm` so the numeric code reads like `std` and stays
//! bit-reproducible across platforms.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Euclidean remainder for non-negative periods.
#[inline]
pub fn rem_euclid(x: f64, period: f64) -> f64 {
    let r = libm::fmod(x, period);
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

pub const PI: f64 = core::f64::consts::PI;
