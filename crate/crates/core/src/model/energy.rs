//! Movement energy model and its piecewise linearization.

use crate::tol::NUM_GUARD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Convex movement-energy function
/// `f(d) = C1*d + C2 + C3/d + C4/d^2 + C5/d^3`,
/// i.e. `sum_{i=1..5} C_i * d^(2-i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyFunction {
    pub coeffs: [f64; 5],
}

/// Number of sample points used for the numeric convexity check.
pub const CONVEXITY_SAMPLES: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("energy function evaluated at non-positive duration {0}")]
    NonPositiveDuration(f64),
    #[error("energy function is not convex on [{lo}, {hi}]")]
    NotConvex { lo: f64, hi: f64 },
}

impl EnergyFunction {
    pub fn new(coeffs: [f64; 5]) -> Self {
        EnergyFunction { coeffs }
    }

    /// Evaluates `sum C_i d^(2-i)`. Fails for `d <= 0` since powers of `1/d`
    /// appear in the model.
    pub fn eval(&self, d: f64) -> Result<f64, EnergyError> {
        if d <= 0.0 {
            return Err(EnergyError::NonPositiveDuration(d));
        }
        Ok(self.eval_unchecked(d))
    }

    /// Like [`EnergyFunction::eval`] but assumes `d > 0`.
    pub fn eval_unchecked(&self, d: f64) -> f64 {
        let [c1, c2, c3, c4, c5] = self.coeffs;
        let inv = 1.0 / d;
        c1 * d + c2 + c3 * inv + c4 * inv * inv + c5 * inv * inv * inv
    }

    /// Numeric convexity check: second differences at uniformly spaced sample
    /// points must not fall below `-NUM_GUARD`. Sufficient at desk scale; the
    /// coefficient-sign conditions would be sufficient but not necessary.
    pub fn is_convex_on(&self, lo: f64, hi: f64) -> bool {
        if lo <= 0.0 || hi < lo {
            return false;
        }
        if hi == lo {
            return true;
        }
        let h = (hi - lo) / (CONVEXITY_SAMPLES - 1) as f64;
        let mut prev = self.eval_unchecked(lo);
        let mut cur = self.eval_unchecked(lo + h);
        for k in 2..CONVEXITY_SAMPLES {
            let next = self.eval_unchecked(lo + h * k as f64);
            if next - 2.0 * cur + prev < -NUM_GUARD {
                return false;
            }
            prev = cur;
            cur = next;
        }
        true
    }

    /// True when the function is nonnegative at the convexity sample points.
    pub fn is_nonnegative_on(&self, lo: f64, hi: f64) -> bool {
        if lo <= 0.0 || hi < lo {
            return false;
        }
        let steps = if hi == lo { 1 } else { CONVEXITY_SAMPLES };
        let h = if steps == 1 {
            0.0
        } else {
            (hi - lo) / (steps - 1) as f64
        };
        (0..steps).all(|k| self.eval_unchecked(lo + h * k as f64) >= -NUM_GUARD)
    }
}

/// Piecewise-linear over-approximation of an [`EnergyFunction`]: the maximum
/// of `segments` chords through uniformly spaced breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlApprox {
    /// `(k, q)` per segment: watts slope and joules offset of `k*d + q`.
    pub segments: Vec<(f64, f64)>,
    /// Domain `[d_min, d_max]` the approximation was built on.
    pub domain: (f64, f64),
}

impl PwlApprox {
    /// Value of the approximation, `max_b (k_b * d + q_b)`.
    pub fn value(&self, d: f64) -> f64 {
        self.segments
            .iter()
            .map(|&(k, q)| k * d + q)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Breakpoints the approximation was constructed on.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.domain;
        let n = self.segments.len();
        if hi == lo || n == 0 {
            return vec![lo];
        }
        (0..=n)
            .map(|b| lo + (hi - lo) * b as f64 / n as f64)
            .collect()
    }
}

/// Builds the chord approximation of `f` on `[d_min, d_max]` with `segments`
/// pieces. For convex `f` the chords dominate the function, so the result
/// over-approximates energy and is exact at the breakpoints. A degenerate
/// domain (`d_min == d_max`) yields a single constant segment.
pub fn pwl_approximate(
    f: &EnergyFunction,
    d_min: f64,
    d_max: f64,
    segments: usize,
) -> Result<PwlApprox, EnergyError> {
    assert!(segments >= 1, "at least one segment required");
    if d_min <= 0.0 {
        return Err(EnergyError::NonPositiveDuration(d_min));
    }
    if !f.is_convex_on(d_min, d_max) {
        return Err(EnergyError::NotConvex {
            lo: d_min,
            hi: d_max,
        });
    }
    if d_max <= d_min {
        let v = f.eval(d_min)?;
        return Ok(PwlApprox {
            segments: vec![(0.0, v)],
            domain: (d_min, d_min),
        });
    }
    let mut segs = Vec::with_capacity(segments);
    let step = (d_max - d_min) / segments as f64;
    let mut x0 = d_min;
    let mut y0 = f.eval(x0)?;
    for b in 1..=segments {
        // recompute the grid point from the index so breakpoints are shared
        // exactly between adjacent chords
        let x1 = if b == segments {
            d_max
        } else {
            d_min + step * b as f64
        };
        let y1 = f.eval(x1)?;
        let k = (y1 - y0) / (x1 - x0);
        let q = y0 - k * x0;
        segs.push((k, q));
        x0 = x1;
        y0 = y1;
    }
    Ok(PwlApprox {
        segments: segs,
        domain: (d_min, d_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_linear_case() {
        // C = (1, 2, 0, 0, 0): f(3) = 1*3 + 2 = 5
        let f = EnergyFunction::new([1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.eval(3.0).unwrap(), 5.0);
    }

    #[test]
    fn eval_reciprocal_case() {
        // C = (0, 0, 1, 0, 0): f(2) = 1/2
        let f = EnergyFunction::new([0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.eval(2.0).unwrap(), 0.5);
    }

    #[test]
    fn eval_rejects_nonpositive() {
        let f = EnergyFunction::new([1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(f.eval(0.0).is_err());
        assert!(f.eval(-1.0).is_err());
    }

    #[test]
    fn concave_term_detected() {
        // C = (0, 0, -1, 0, 0): f''(d) = -2/d^3 < 0
        let f = EnergyFunction::new([0.0, 0.0, -1.0, 0.0, 0.0]);
        assert!(!f.is_convex_on(1.0, 2.0));
    }

    #[test]
    fn single_chord_of_reciprocal() {
        // chord of 1/d through (1,1) and (2,0.5): k = -0.5, q = 1.5
        let f = EnergyFunction::new([0.0, 0.0, 1.0, 0.0, 0.0]);
        let pwl = pwl_approximate(&f, 1.0, 2.0, 1).unwrap();
        assert_eq!(pwl.segments.len(), 1);
        let (k, q) = pwl.segments[0];
        assert!((k + 0.5).abs() < 1e-12);
        assert!((q - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_function_flat_segments() {
        let f = EnergyFunction::new([0.0, 7.25, 0.0, 0.0, 0.0]);
        let pwl = pwl_approximate(&f, 0.5, 3.0, 4).unwrap();
        for &(k, q) in &pwl.segments {
            assert_eq!(k, 0.0);
            assert_eq!(q, 7.25);
        }
    }

    #[test]
    fn degenerate_domain_single_constant() {
        let f = EnergyFunction::new([1.0, 1.0, 1.0, 0.0, 0.0]);
        let pwl = pwl_approximate(&f, 2.0, 2.0, 5).unwrap();
        assert_eq!(pwl.segments, vec![(0.0, f.eval(2.0).unwrap())]);
    }

    #[test]
    fn dominates_function_and_exact_at_breakpoints() {
        let f = EnergyFunction::new([0.5, 1.0, 4.0, 2.0, 1.0]);
        let pwl = pwl_approximate(&f, 0.8, 4.0, 10).unwrap();
        for bp in pwl.breakpoints() {
            assert!((pwl.value(bp) - f.eval(bp).unwrap()).abs() < 1e-9);
        }
        for i in 0..=1000 {
            let d = 0.8 + (4.0 - 0.8) * i as f64 / 1000.0;
            assert!(pwl.value(d) >= f.eval(d).unwrap() - NUM_GUARD);
        }
    }
}
