//! Protocol mathematics: d-dimensional Shannon entropy, secret key rate,
//! QDER from a joint detection matrix, and security thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::JointDetectionMatrix;
use crate::num::{lit, Real};

#[derive(Debug, Error, PartialEq)]
pub enum QkdError {
    #[error("error rate must lie in [0, 1], got {0}")]
    ErrorRateOutOfRange(f64),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("conditional column {column} sums to {sum}, expected 1")]
    Unnormalized { column: usize, sum: f64 },
    #[error("joint detection matrix has no usable columns")]
    NoUsableColumns,
    #[error("threshold bisection failed to converge after {0} iterations")]
    BisectionStalled(usize),
}

/// Per-dimension QKD performance figures.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QkdMetrics<T> {
    /// Hilbert-space dimension (number of modes).
    pub d: usize,
    /// Quantum dit error rate.
    pub qder_e: T,
    /// Error rate at which the key rate crosses zero for this d.
    pub threshold_e: T,
    /// Net information per sifted detected photon R(e), unclamped.
    pub bits_per_photon: T,
    /// Matched-basis symbol rate on mode pixels, symbols/s.
    pub sifted_rate: T,
    /// max(0, R(e)) * sifted_rate, bits/s.
    pub bit_rate: T,
}

/// d-dimensional Shannon entropy
/// `h_d(e) = -e log2(e/(d-1)) - (1-e) log2(1-e)`, with the `0 log 0 := 0`
/// continuity limits at e = 0 and e = 1.
pub fn shannon_entropy_d<T: Real>(e: T, d: usize) -> Result<T, QkdError> {
    if d < 2 {
        return Err(QkdError::DimensionTooSmall(d));
    }
    if !(e >= T::zero() && e <= T::one()) {
        return Err(QkdError::ErrorRateOutOfRange(e.to_f64().unwrap_or(f64::NAN)));
    }
    let one = T::one();
    let d_minus_1 = lit::<T>((d - 1) as f64);
    let first = if e == T::zero() {
        T::zero()
    } else {
        -e * (e / d_minus_1).log2()
    };
    let second = if e == one {
        T::zero()
    } else {
        -(one - e) * (one - e).log2()
    };
    Ok(first + second)
}

/// Secret key rate `R(e) = log2(d) - 2 h_d(e)` in bits per sifted photon.
pub fn key_rate<T: Real>(e: T, d: usize) -> Result<T, QkdError> {
    let h = shannon_entropy_d(e, d)?;
    Ok(lit::<T>(d as f64).log2() - lit::<T>(2.0) * h)
}

/// QDER from a joint detection matrix: `e = 1 - Tr(conditional)/d`, the
/// trace running over usable columns only.
pub fn qder<T: Real>(matrix: &JointDetectionMatrix<T>) -> Result<T, QkdError> {
    let d = matrix.d();
    let tol = lit::<T>(1e-9);
    let mut trace = T::zero();
    let mut usable = 0usize;
    for col in 0..d {
        if !matrix.column_usable(col) {
            continue;
        }
        let sum = matrix.conditional_column_sum(col);
        if (sum - T::one()).abs() > tol {
            return Err(QkdError::Unnormalized {
                column: col,
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        trace += matrix.conditional(col, col);
        usable += 1;
    }
    if usable == 0 {
        return Err(QkdError::NoUsableColumns);
    }
    Ok(T::one() - trace / lit(usable as f64))
}

/// Critical error rate where `R(e) = 0`, found by bisection on
/// `(0, (d-1)/d)`. `R` is continuous and strictly decreasing there, so the
/// root is unique.
pub fn security_threshold<T: Real>(d: usize) -> Result<T, QkdError> {
    const MAX_ITERATIONS: usize = 200;
    if d < 2 {
        return Err(QkdError::DimensionTooSmall(d));
    }
    let eps = lit::<T>(1e-9);
    let tol = lit::<T>(1e-6);
    let mut lo = eps;
    let mut hi = lit::<T>((d - 1) as f64) / lit::<T>(d as f64) - eps;
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= tol {
            return Ok((lo + hi) / lit(2.0));
        }
        let mid = (lo + hi) / lit(2.0);
        if key_rate(mid, d)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(QkdError::BisectionStalled(MAX_ITERATIONS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_reference_points() {
        assert_eq!(shannon_entropy_d(0.0f64, 7).unwrap(), 0.0);
        assert!((shannon_entropy_d(0.5f64, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((shannon_entropy_d(0.75f64, 4).unwrap() - 2.0).abs() < 1e-12);
        // Maximum log2(d) at e = (d-1)/d.
        for d in [2usize, 3, 16, 545] {
            let e_max = (d - 1) as f64 / d as f64;
            let h = shannon_entropy_d(e_max, d).unwrap();
            assert!((h - (d as f64).log2()).abs() < 1e-10, "d={d} h={h}");
        }
        assert!(shannon_entropy_d(-0.1f64, 2).is_err());
        assert!(shannon_entropy_d(1.1f64, 2).is_err());
        assert!(shannon_entropy_d(0.1f64, 1).is_err());
    }

    #[test]
    fn key_rate_reference_points() {
        assert!((key_rate(0.0f64, 2).unwrap() - 1.0).abs() < 1e-12);
        let r545 = key_rate(0.0f64, 545).unwrap();
        assert!((r545 - (545f64).log2()).abs() < 1e-12);
        assert!((r545 - 9.090).abs() < 5e-4);
        // Binary threshold around 11%.
        assert!(key_rate(0.11f64, 2).unwrap().abs() < 1e-3);
    }

    #[test]
    fn key_rate_strictly_decreasing() {
        for d in [2usize, 4, 90, 545] {
            let e_max = (d - 1) as f64 / d as f64;
            let mut prev = key_rate(0.0, d).unwrap();
            for i in 1..=50 {
                let e = e_max * i as f64 / 50.0;
                let r = key_rate(e, d).unwrap();
                assert!(r < prev, "d={d} e={e}");
                prev = r;
            }
        }
    }

    #[test]
    fn entropy_key_rate_identity() {
        // R + 2 h_d = log2 d by construction; checked over a deterministic
        // pseudo-random sample of (e, d).
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let d = 2 + (state >> 33) as usize % 4096;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let e = (state >> 11) as f64 / (1u64 << 53) as f64;
            let lhs = key_rate(e, d).unwrap() + 2.0 * shannon_entropy_d(e, d).unwrap();
            assert!((lhs - (d as f64).log2()).abs() < 1e-9, "d={d} e={e}");
        }
    }

    /// Independent oracle: locate the root of R by scanning a fine grid.
    fn threshold_by_grid_scan(d: usize) -> (f64, f64) {
        let e_max = (d - 1) as f64 / d as f64;
        let n = 2_000_000usize;
        let mut prev_e = e_max * 1e-9;
        let mut prev_r = key_rate(prev_e, d).unwrap();
        for i in 1..n {
            let e = e_max * i as f64 / n as f64;
            let r = key_rate(e, d).unwrap();
            if prev_r > 0.0 && r <= 0.0 {
                return (prev_e, e);
            }
            prev_e = e;
            prev_r = r;
        }
        panic!("no sign change found for d={d}");
    }

    #[test]
    fn threshold_matches_grid_scan_oracle() {
        for d in [2usize, 4, 17] {
            let (lo, hi) = threshold_by_grid_scan(d);
            let t = security_threshold::<f64>(d).unwrap();
            assert!(t >= lo - 2e-6 && t <= hi + 2e-6, "d={d}: {t} vs [{lo}, {hi}]");
        }
    }

    #[test]
    fn threshold_reference_values() {
        let t2 = security_threshold::<f64>(2).unwrap();
        assert!((t2 - 0.1100).abs() < 5e-4, "{t2}");
        assert!((t2 - 0.110028).abs() < 5e-6, "{t2}");
        let t4 = security_threshold::<f64>(4).unwrap();
        assert!((t4 - 0.1893).abs() < 5e-4, "{t4}");
    }

    #[test]
    fn threshold_increases_with_dimension() {
        let mut d = 2usize;
        let mut prev = 0.0f64;
        while d <= 4096 {
            let t = security_threshold::<f64>(d).unwrap();
            assert!(t > prev, "d={d}: {t} <= {prev}");
            assert!(t > 0.0 && t < (d - 1) as f64 / d as f64);
            prev = t;
            d *= 2;
        }
    }

    #[test]
    fn threshold_rejects_degenerate_dimension() {
        assert!(matches!(
            security_threshold::<f64>(1),
            Err(QkdError::DimensionTooSmall(1))
        ));
    }
}
