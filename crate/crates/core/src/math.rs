//! Float helpers that `core` lacks, backed by `libm`.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Largest entry; `-inf` for an empty slice.
pub fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `ln Σ exp(x_i)` with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = max(xs);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ln(xs.iter().map(|&x| exp(x - m)).sum::<f64>())
}

/// Normalised `exp(x_i)` computed as `exp(x_i − M) / Σ exp(x_j − M)`.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = max(xs);
    let mut w: Vec<f64> = xs.iter().map(|&x| exp(x - m)).collect();
    let total: f64 = w.iter().sum();
    for p in &mut w {
        *p /= total;
    }
    w
}

/// Relative-tolerance equality used for exponent ties.
#[inline]
pub fn ties(a: f64, b: f64, rel: f64) -> bool {
    abs(a - b) <= rel * f64::max(1.0, f64::max(abs(a), abs(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_survives_huge_exponents() {
        let p = softmax(&[1.0e6, 1.0e6 + 1.0, 1.0e6 - 700.0]);
        let e = exp(1.0);
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-12);
        assert!(p[2] > 0.0 && p[2] < 1e-300);
    }

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = ln(xs.iter().map(|&x| exp(x)).sum::<f64>());
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }
}
