//! Generalized-Zipf popularity and the LRU miss-rate model derived from it.
//!
//! Frequency density: `p(ν) ∝ 1 / (μ ν^r + (λ-μ) ν^q)` with `1 ≤ r < q`.
//! The two denominator terms cross at `ν_k = (μ/(λ-μ))^(1/(q-r))`.
//!
//! Under independent references the inter-reference distance law is
//! approximately `C t^(q-3)` for `t < 1/ν_k` and a continuity-matched
//! `t^(r-3)` beyond. Integrating twice (working-set theory) gives the miss
//! rate `m(t) = C t^(q-2)/(2-q)` and the working-set size
//! `s(t) = C t^(q-1)/((q-1)(2-q))`; eliminating `t` yields the power law
//! `m(s) ∝ s^(1 - 1/(q-1))` in the head and `m(s) ∝ s^(1 - 1/(r-1))` in
//! the tail, joined continuously at `s_k = s(1/ν_k)`.

use serde::{Deserialize, Serialize};

use super::quad;
use super::special::{generalized_harmonic, hurwitz_zeta, upper_incomplete_gamma};
use crate::error::{invalid, Error, Result};

/// Raw, serializable parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GZipfSpec {
    /// High-frequency exponent.
    pub q: f64,
    /// Low-frequency exponent.
    pub r: f64,
    pub mu: f64,
    pub lambda: f64,
    /// Reference-string length N.
    pub n_refs: u64,
}

/// Validated GZipf parameters with their derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GZipfSpec", into = "GZipfSpec")]
pub struct GZipfParams {
    spec: GZipfSpec,
    nu_k: f64,
    c_norm: f64,
    pdf_norm: f64,
}

impl TryFrom<GZipfSpec> for GZipfParams {
    type Error = Error;

    fn try_from(s: GZipfSpec) -> Result<Self> {
        GZipfParams::new(s.q, s.r, s.mu, s.lambda, s.n_refs)
    }
}

impl From<GZipfParams> for GZipfSpec {
    fn from(p: GZipfParams) -> Self {
        p.spec
    }
}

fn crossover(q: f64, r: f64, mu: f64, lambda: f64) -> f64 {
    (mu / (lambda - mu)).powf(1.0 / (q - r))
}

impl GZipfParams {
    pub fn new(q: f64, r: f64, mu: f64, lambda: f64, n_refs: u64) -> Result<Self> {
        if ![q, r, mu, lambda].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite GZipf parameter"));
        }
        if !(1.0 <= r && r < q && q < 3.0) {
            return Err(invalid(format!("need 1 <= r < q < 3, got r={r}, q={q}")));
        }
        if !(mu > 0.0 && lambda > mu) {
            return Err(invalid(format!(
                "need lambda > mu > 0, got mu={mu}, lambda={lambda}"
            )));
        }
        if n_refs < 2 {
            return Err(invalid("n_refs must be at least 2"));
        }
        let nu_k = crossover(q, r, mu, lambda);
        if !(nu_k > 0.0 && nu_k <= 1.0) {
            return Err(invalid(format!(
                "crossover frequency {nu_k} outside (0, 1]"
            )));
        }
        let spec = GZipfSpec {
            q,
            r,
            mu,
            lambda,
            n_refs,
        };
        let c_norm = normalization_c_from(q, r, nu_k, n_refs)?;
        let pdf_norm = pdf_normalizer(&spec)?;
        Ok(Self {
            spec,
            nu_k,
            c_norm,
            pdf_norm,
        })
    }

    pub fn spec(&self) -> GZipfSpec {
        self.spec
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    pub fn r(&self) -> f64 {
        self.spec.r
    }

    pub fn mu(&self) -> f64 {
        self.spec.mu
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn n_refs(&self) -> u64 {
        self.spec.n_refs
    }

    /// Crossover frequency ν_k.
    pub fn nu_k(&self) -> f64 {
        self.nu_k
    }

    /// Normalization constant C of the inter-reference law.
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// Same popularity, different string length.
    pub fn with_n_refs(&self, n_refs: u64) -> Result<Self> {
        Self::new(self.q(), self.r(), self.mu(), self.lambda(), n_refs)
    }

    /// Same crossover ν_k, different exponents (μ/λ are re-derived with λ = 1 + μ).
    pub fn with_exponents(&self, q: f64, r: f64) -> Result<Self> {
        // μ/(λ-μ) = ν_k^(q-r), choose λ - μ = 1.
        let mu = self.nu_k.powf(q - r);
        Self::new(q, r, mu, mu + 1.0, self.n_refs())
    }

    fn require_model_domain(&self) -> Result<()> {
        let (q, r) = (self.q(), self.r());
        if !(1.0 < r && r < q && q < 2.0) {
            return Err(Error::Domain(format!(
                "miss-rate closed forms need 1 < r < q < 2, got r={r}, q={q}"
            )));
        }
        Ok(())
    }

    /// Head-regime amplitude: `m(s) = A s^((q-2)/(q-1))`.
    fn head_amplitude(&self) -> f64 {
        let (q, c) = (self.q(), self.c_norm);
        (c.ln() / (q - 1.0) - (2.0 - q).ln() / (q - 1.0) + (q - 2.0) / (q - 1.0) * (q - 1.0).ln())
            .exp()
    }

    /// Working-set size at the crossover distance `1/ν_k`.
    pub fn crossover_size(&self) -> f64 {
        working_set_size(self.q(), self.c_norm, 1.0 / self.nu_k)
    }

    /// Miss rate at the crossover size.
    pub fn crossover_miss_rate(&self) -> f64 {
        miss_of_distance(self.q(), self.c_norm, 1.0 / self.nu_k)
    }
}

/// `1/C = H(round(1/ν_k), 3-q) - ζ(3-r, N) + ζ(3-r, 1/ν_k)`.
fn normalization_c_from(q: f64, r: f64, nu_k: f64, n_refs: u64) -> Result<f64> {
    let inv = 1.0 / nu_k;
    if !inv.is_finite() {
        return Err(Error::Numerical(format!("1/ν_k overflowed (ν_k={nu_k})")));
    }
    let order = inv.round().max(1.0) as u64;
    let inv_c = generalized_harmonic(order, 3.0 - q) - hurwitz_zeta(3.0 - r, n_refs as f64)?
        + hurwitz_zeta(3.0 - r, inv)?;
    let c = 1.0 / inv_c;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Numerical(format!(
            "normalization constant {c} is not positive"
        )));
    }
    Ok(c)
}

/// Normalization constant C for `p`.
pub fn normalization_c(p: &GZipfParams) -> f64 {
    p.c_norm
}

fn pdf_normalizer(s: &GZipfSpec) -> Result<f64> {
    // Integrate in log space: ν = e^u, dν = ν du.
    let f = |u: f64| {
        let nu = u.exp();
        nu / (s.mu * nu.powf(s.r) + (s.lambda - s.mu) * nu.powf(s.q))
    };
    let lo = -(s.n_refs as f64).ln();
    let total = quad::integrate(f, lo, 0.0, 0.0, 1e-12)?;
    Ok(1.0 / total)
}

/// Density of objects with normalized frequency `nu`, normalized over `[1/N, 1]`.
pub fn gzipf_pdf(nu: f64, p: &GZipfParams) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid(format!("frequency {nu} outside (0, 1]")));
    }
    Ok(p.pdf_norm / (p.mu() * nu.powf(p.r()) + (p.lambda() - p.mu()) * nu.powf(p.q())))
}

/// Unnormalized head-regime inter-reference law `Γ(3-q, ν_k t) / t^(3-q)`.
pub fn inter_ref_exact_head(t: f64, p: &GZipfParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("distance {t} must be positive")));
    }
    let a = 3.0 - p.q();
    Ok(upper_incomplete_gamma(a, p.nu_k * t)? / t.powf(a))
}

/// Piecewise power-law inter-reference law: `C t^(q-3)` below `1/ν_k`, and
/// `C ν_k^(r-q) t^(r-3)` from `1/ν_k` on (continuous at the boundary).
pub fn inter_ref_asymptotic(t: f64, p: &GZipfParams) -> f64 {
    let (q, r, c) = (p.q(), p.r(), p.c_norm);
    if t < 1.0 / p.nu_k {
        c * t.powf(q - 3.0)
    } else {
        c * p.nu_k.powf(r - q) * t.powf(r - 3.0)
    }
}

/// Miss rate of a working set of window `t` under a pure `C t^(x-3)` law.
pub(crate) fn miss_of_distance(x: f64, c: f64, t: f64) -> f64 {
    c * t.powf(x - 2.0) / (2.0 - x)
}

/// Average working-set size for window `t` under a pure `C t^(x-3)` law.
pub(crate) fn working_set_size(x: f64, c: f64, t: f64) -> f64 {
    c * t.powf(x - 1.0) / ((x - 1.0) * (2.0 - x))
}

/// `g(x) = -C^(1/(2-x)) (2-x)^((x-1)/(x-2)) / (2 - 3x + x²)`, the prefactor of
/// the inverted single-regime law `s(m) = g(x) m^(1 - 1/(2-x))`.
pub fn size_prefactor(x: f64, c: f64) -> f64 {
    let ln_abs = c.ln() / (2.0 - x) + (x - 1.0) / (x - 2.0) * (2.0 - x).ln();
    let denom = 2.0 - 3.0 * x + x * x;
    -ln_abs.exp() / denom
}

/// Single-regime miss rate `m(s)` (unclamped) for exponent `x` and constant `c`.
pub fn single_regime_miss_rate(x: f64, c: f64, s: f64) -> f64 {
    let ln_a =
        c.ln() / (x - 1.0) - (2.0 - x).ln() / (x - 1.0) + (x - 2.0) / (x - 1.0) * (x - 1.0).ln();
    (ln_a + (x - 2.0) / (x - 1.0) * s.ln()).exp()
}

/// Miss rate before clamping to 1.
pub fn miss_rate_of_size_unclamped(s: f64, p: &GZipfParams) -> Result<f64> {
    p.require_model_domain()?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("cache size {s} must be positive")));
    }
    let (q, r) = (p.q(), p.r());
    let s_k = p.crossover_size();
    Ok(if s < s_k {
        (p.head_amplitude().ln() + (q - 2.0) / (q - 1.0) * s.ln()).exp()
    } else {
        let m_k = p.crossover_miss_rate();
        m_k * (s / s_k).powf((r - 2.0) / (r - 1.0))
    })
}

/// Analytic LRU miss rate for a cache of `s` entries, clamped to 1.
///
/// The asymptotic law exceeds 1 for very small caches; use
/// [`miss_rate_of_size_unclamped`] to detect that.
pub fn miss_rate_of_size(s: f64, p: &GZipfParams) -> Result<f64> {
    Ok(miss_rate_of_size_unclamped(s, p)?.min(1.0))
}

/// Cache size achieving miss rate `m`. Miss rates at or above the crossover
/// miss rate fall in the head branch, lower ones in the tail branch.
pub fn size_of_miss_rate(m: f64, p: &GZipfParams) -> Result<f64> {
    p.require_model_domain()?;
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("miss rate {m} outside (0, 1)")));
    }
    let (q, r) = (p.q(), p.r());
    let m_k = p.crossover_miss_rate();
    let s = if m >= m_k {
        size_prefactor(q, p.c_norm) * m.powf(1.0 - 1.0 / (2.0 - q))
    } else {
        p.crossover_size() * (m / m_k).powf((r - 1.0) / (r - 2.0))
    };
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Numerical(format!("cache size for m={m} is {s}")));
    }
    Ok(s)
}

/// Cache size for the logarithmic `q = 2` case: `s = (C + m) e^(-m/C)`.
pub fn size_of_miss_rate_q2(m: f64, c: f64) -> f64 {
    (c + m) * (-m / c).exp()
}

/// How `r` follows `q` along a sensitivity sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExponentSweep {
    /// `r = q - offset`.
    CoVary { offset: f64 },
    /// `r` stays at the base value.
    PinR,
}

/// Cache size needed for `m_fixed` as the popularity exponent `q` moves over
/// `grid`, keeping the crossover frequency of `base`.
pub fn sensitivity_curve(
    m_fixed: f64,
    grid: &[f64],
    base: &GZipfParams,
    sweep: ExponentSweep,
) -> Result<Vec<(f64, f64)>> {
    crate::par::map(grid, |&q| {
        if !(q > 1.0 && q < 2.0) {
            return Err(invalid(format!("grid exponent {q} outside (1, 2)")));
        }
        let r = match sweep {
            ExponentSweep::CoVary { offset } => q - offset,
            ExponentSweep::PinR => base.r(),
        };
        let p = base.with_exponents(q, r)?;
        Ok((q, size_of_miss_rate(m_fixed, &p)?))
    })
    .into_iter()
    .collect()
}
