//! Three-regime extension of the miss-rate model.
//!
//! When the measured popularity shows three power-law regimes with
//! exponents α₁, α₂, α₃ (frequency domain) crossing at ν_k1 > ν_k2, the
//! inter-reference law becomes three power laws joined at `1/ν_k1` and
//! `1/ν_k2`. The first regime maps to cache sizes through the working-set
//! transform with constant C; the later regimes continue that transform
//! continuously, so the resulting `m(s)` is a continuous piecewise power law
//! with slopes `1 - 1/(α_i - 1)`.

use serde::{Deserialize, Serialize};

use super::gzipf::{miss_of_distance, single_regime_miss_rate, working_set_size};
use super::special::{generalized_harmonic, hurwitz_zeta};
use crate::curve::{CurveSource, MissRateCurve, MissRatePoint};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeRegionSpec {
    /// Frequency-domain exponents, head first.
    pub alphas: [f64; 3],
    /// Normalized frequencies ν_k1 > ν_k2 where the regimes meet.
    pub crossover_freqs: [f64; 2],
    /// Reference-string length N.
    pub n_refs: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThreeRegionSpec", into = "ThreeRegionSpec")]
pub struct ThreeRegionParams {
    spec: ThreeRegionSpec,
    c_norm: f64,
    /// Cache sizes at the two regime boundaries.
    bound_sizes: [f64; 2],
    /// Miss rates at the two regime boundaries.
    bound_miss: [f64; 2],
}

impl TryFrom<ThreeRegionSpec> for ThreeRegionParams {
    type Error = Error;

    fn try_from(s: ThreeRegionSpec) -> Result<Self> {
        ThreeRegionParams::new(s.alphas, s.crossover_freqs, s.n_refs)
    }
}

impl From<ThreeRegionParams> for ThreeRegionSpec {
    fn from(p: ThreeRegionParams) -> Self {
        p.spec
    }
}

impl ThreeRegionParams {
    pub fn new(alphas: [f64; 3], crossover_freqs: [f64; 2], n_refs: u64) -> Result<Self> {
        if let Some(a) = alphas.iter().find(|a| !(**a > 1.0 && **a < 2.0)) {
            return Err(invalid(format!("exponent {a} outside (1, 2)")));
        }
        let [nu1, nu2] = crossover_freqs;
        if !(nu1 <= 1.0 && nu2 > 0.0) {
            return Err(invalid(format!(
                "crossover frequencies {crossover_freqs:?} outside (0, 1]"
            )));
        }
        if nu1 <= nu2 {
            return Err(invalid(format!(
                "inconsistent boundaries: ν_k1 = {nu1} must exceed ν_k2 = {nu2}"
            )));
        }
        if n_refs < 2 || 1.0 / nu2 >= n_refs as f64 {
            return Err(invalid(format!(
                "1/ν_k2 = {} must lie below N = {n_refs}",
                1.0 / nu2
            )));
        }
        let c = normalization(alphas, crossover_freqs, n_refs)?;
        let (t1, t2) = (1.0 / nu1, 1.0 / nu2);
        let s1 = working_set_size(alphas[0], c, t1);
        let m1 = miss_of_distance(alphas[0], c, t1);
        let s2 = s1 * (t2 / t1).powf(alphas[1] - 1.0);
        let m2 = m1 * (t2 / t1).powf(alphas[1] - 2.0);
        if !(s1 > 0.0 && s2 > s1 && s2.is_finite() && m2 > 0.0) {
            return Err(invalid(format!(
                "non-monotone regime boundaries s1={s1}, s2={s2}"
            )));
        }
        Ok(Self {
            spec: ThreeRegionSpec {
                alphas,
                crossover_freqs,
                n_refs,
            },
            c_norm: c,
            bound_sizes: [s1, s2],
            bound_miss: [m1, m2],
        })
    }

    pub fn spec(&self) -> ThreeRegionSpec {
        self.spec
    }

    pub fn alphas(&self) -> [f64; 3] {
        self.spec.alphas
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// Cache sizes where the regimes meet.
    pub fn boundary_sizes(&self) -> [f64; 2] {
        self.bound_sizes
    }

    /// Log-log slope of the miss rate in each regime.
    pub fn slopes(&self) -> [f64; 3] {
        self.spec.alphas.map(|a| 1.0 - 1.0 / (a - 1.0))
    }

    /// Unclamped miss rate at size `s`.
    pub fn miss_rate_unclamped(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("cache size {s} must be positive")));
        }
        let slopes = self.slopes();
        let [s1, s2] = self.bound_sizes;
        let [m1, m2] = self.bound_miss;
        Ok(if s < s1 {
            single_regime_miss_rate(self.spec.alphas[0], self.c_norm, s)
        } else if s < s2 {
            m1 * (s / s1).powf(slopes[1])
        } else {
            m2 * (s / s2).powf(slopes[2])
        })
    }
}

/// `1/C = H(1/ν_k1, 3-α₁) + [ζ(3-α₂, 1/ν_k1) - ζ(3-α₂, 1/ν_k2)] + [ζ(3-α₃, 1/ν_k2) - ζ(3-α₃, N)]`.
fn normalization(alphas: [f64; 3], nus: [f64; 2], n_refs: u64) -> Result<f64> {
    let (t1, t2) = (1.0 / nus[0], 1.0 / nus[1]);
    let order = t1.round().max(1.0) as u64;
    let inv = generalized_harmonic(order, 3.0 - alphas[0]) + hurwitz_zeta(3.0 - alphas[1], t1)?
        - hurwitz_zeta(3.0 - alphas[1], t2)?
        + hurwitz_zeta(3.0 - alphas[2], t2)?
        - hurwitz_zeta(3.0 - alphas[2], n_refs as f64)?;
    let c = 1.0 / inv;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Numerical(format!(
            "normalization constant {c} is not positive"
        )));
    }
    Ok(c)
}

/// Evaluates the three-regime model on `sizes`, clamping at 1.
pub fn three_region_miss_curve(p: &ThreeRegionParams, sizes: &[f64]) -> Result<MissRateCurve> {
    let points = sizes
        .iter()
        .map(|&s| {
            Ok(MissRatePoint {
                size: s,
                miss_rate: p.miss_rate_unclamped(s)?.min(1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MissRateCurve::new(points, CurveSource::Analytic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::log_space;

    fn params() -> ThreeRegionParams {
        ThreeRegionParams::new([1.8, 1.6, 1.3], [1e-2, 1e-4], 10_000_000).unwrap()
    }

    fn slope(p: &ThreeRegionParams, a: f64, b: f64) -> f64 {
        let (ma, mb) = (
            p.miss_rate_unclamped(a).unwrap(),
            p.miss_rate_unclamped(b).unwrap(),
        );
        (mb.ln() - ma.ln()) / (b.ln() - a.ln())
    }

    #[test]
    fn slopes_follow_exponents() {
        let p = params();
        let [s1, s2] = p.boundary_sizes();
        let expect = p.alphas().map(|a| 1.0 - 1.0 / (a - 1.0));
        assert!((slope(&p, s1 / 100.0, s1 / 2.0) - expect[0]).abs() < 1e-9);
        assert!((slope(&p, s1 * 1.01, s2 * 0.99) - expect[1]).abs() < 1e-9);
        assert!((slope(&p, s2 * 2.0, s2 * 50.0) - expect[2]).abs() < 1e-9);
    }

    #[test]
    fn continuous_at_boundaries() {
        let p = params();
        for b in p.boundary_sizes() {
            let left = p.miss_rate_unclamped(b * (1.0 - 1e-13)).unwrap();
            let right = p.miss_rate_unclamped(b).unwrap();
            assert!(((left - right) / right).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_exponents_collapse_to_single_regime() {
        let p = ThreeRegionParams::new([1.7; 3], [1e-2, 1e-4], 1_000_000).unwrap();
        for s in log_space(1.0, 1e6, 40) {
            let m = p.miss_rate_unclamped(s).unwrap();
            let single = single_regime_miss_rate(1.7, p.c_norm(), s);
            assert!(((m - single) / single).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn rejects_inconsistent_boundaries() {
        assert!(ThreeRegionParams::new([1.8, 1.6, 1.3], [1e-4, 1e-2], 1_000_000).is_err());
        assert!(ThreeRegionParams::new([1.8, 1.6, 1.3], [1e-3, 1e-3], 1_000_000).is_err());
        assert!(ThreeRegionParams::new([0.9, 1.6, 1.3], [1e-2, 1e-4], 1_000_000).is_err());
    }

    #[test]
    fn curve_is_monotone_and_clamped() {
        let p = params();
        let c = three_region_miss_curve(&p, &log_space(1e-3, 1e7, 100)).unwrap();
        assert!(c.is_non_increasing());
        assert!(c
            .points
            .iter()
            .all(|pt| pt.miss_rate <= 1.0 && pt.miss_rate > 0.0));
        assert_eq!(c.source, CurveSource::Analytic);
    }
}
