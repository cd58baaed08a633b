//! Special functions needed by the analytic model.
//!
//! * [`ln_gamma`] / [`gamma`]: Lanczos approximation (g = 7, 9 terms).
//! * [`upper_incomplete_gamma`]: power series for `z < a + 1`, modified
//!   Lentz continued fraction otherwise.
//! * [`hurwitz_zeta`]: direct summation up to a shift of at least 10, then
//!   an Euler–Maclaurin tail.
//! * [`generalized_harmonic`]: direct summation, switching to an
//!   Euler–Maclaurin remainder for very large orders.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Γ(x) for real `x` away from the poles.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    ln_gamma(x).exp()
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// γ(a, z) by its power series; valid for z ≥ 0.
fn lower_gamma_series(a: f64, z: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= z / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * (a * z.ln() - z).exp());
        }
    }
    Err(Error::Numerical(format!(
        "incomplete gamma series did not converge (a={a}, z={z})"
    )))
}

/// Γ(a, z) by continued fraction; requires z > 0 and converges quickly for z > a + 1.
fn upper_gamma_cf(a: f64, z: f64) -> Result<f64> {
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h * (a * z.ln() - z).exp());
        }
    }
    Err(Error::Numerical(format!(
        "incomplete gamma fraction did not converge (a={a}, z={z})"
    )))
}

/// Upper incomplete gamma function Γ(a, z) = ∫_z^∞ x^(a-1) e^(-x) dx.
pub fn upper_incomplete_gamma(a: f64, z: f64) -> Result<f64> {
    if !(a.is_finite() && z.is_finite()) {
        return Err(invalid(format!("Γ({a}, {z}): non-finite argument")));
    }
    if a <= 0.0 {
        return Err(invalid(format!("Γ({a}, {z}): requires a > 0")));
    }
    if z < 0.0 {
        return Err(invalid(format!("Γ({a}, {z}): requires z >= 0")));
    }
    if z == 0.0 {
        return Ok(gamma(a));
    }
    if z < a + 1.0 {
        Ok(gamma(a) - lower_gamma_series(a, z)?)
    } else {
        upper_gamma_cf(a, z)
    }
}

/// B_2j / (2j)! for j = 1..=12.
const BERNOULLI_OVER_FACT: [f64; 12] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3_617.0 / 10_670_622_842_880_000.0,
    43_867.0 / 5_109_094_217_170_944_000.0,
    -174_611.0 / 802_857_662_698_291_200_000.0,
    77_683.0 / 14_101_100_039_391_805_440_000.0,
    -236_364_091.0 / 1_693_824_136_731_743_669_452_800_000.0,
];

/// Euler–Maclaurin correction Σ_j B_2j/(2j)! · f^(2j-1)(w) for f(x) = x^(-s),
/// with f^(2j-1)(w) = -(s)_(2j-1) w^(-s-2j+1). Returns the sum of
/// `-B_2j/(2j)! · f^(2j-1)(w)`, i.e. the terms added when summing from `w` to ∞.
fn em_tail_correction(s: f64, w: f64) -> f64 {
    let mut rising = s; // (s)_1
    let mut wpow = w.powf(-s - 1.0);
    let inv_w2 = 1.0 / (w * w);
    let mut sum = 0.0;
    for (j, coef) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = coef * rising * wpow;
        sum += term;
        if term.abs() <= sum.abs() * EPS {
            break;
        }
        let k = 2.0 * j as f64 + 1.0;
        rising *= (s + k) * (s + k + 1.0);
        wpow *= inv_w2;
    }
    sum
}

/// Hurwitz zeta ζ(s, a) = Σ_{k≥0} (k + a)^(-s), for s > 1 and a > 0.
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64> {
    if !(s.is_finite() && a.is_finite()) {
        return Err(invalid(format!("ζ({s}, {a}): non-finite argument")));
    }
    if s <= 1.0 {
        return Err(invalid(format!("ζ({s}, {a}): requires s > 1")));
    }
    if a <= 0.0 {
        return Err(invalid(format!("ζ({s}, {a}): requires a > 0")));
    }
    let shift = 10.0_f64.max(s);
    let mut sum = 0.0;
    let mut w = a;
    while w < shift {
        sum += w.powf(-s);
        w += 1.0;
    }
    sum += w.powf(1.0 - s) / (s - 1.0) + 0.5 * w.powf(-s) + em_tail_correction(s, w);
    Ok(sum)
}

/// Orders up to this bound are summed term by term.
pub const HARMONIC_DIRECT_LIMIT: u64 = 10_000_000;

/// Generalized harmonic number H(n, m) = Σ_{k=1}^n k^(-m).
pub fn generalized_harmonic(n: u64, m: f64) -> f64 {
    if n <= HARMONIC_DIRECT_LIMIT {
        // Smallest terms first.
        return (1..=n).rev().map(|k| (k as f64).powf(-m)).sum();
    }
    const HEAD: u64 = 16;
    let head: f64 = (1..HEAD).rev().map(|k| (k as f64).powf(-m)).sum();
    // Σ_{k=HEAD}^{n} f(k) = ∫ f + (f(HEAD) + f(n))/2 + EM(HEAD) - EM(n)
    let (a, b) = (HEAD as f64, n as f64);
    let integral = if (m - 1.0).abs() < 1e-15 {
        (b / a).ln()
    } else {
        (b.powf(1.0 - m) - a.powf(1.0 - m)) / (1.0 - m)
    };
    head + integral + 0.5 * (a.powf(-m) + b.powf(-m)) + em_tail_correction(m, a)
        - em_tail_correction(m, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(5.0), 24.0) < 1e-14);
        assert!(rel(gamma(1.5), 0.886_226_925_452_758) < 1e-14);
        assert!(rel(gamma(0.1), 9.513_507_698_668_732) < 1e-13);
    }

    #[test]
    fn incomplete_gamma_identities() {
        let v = upper_incomplete_gamma(1.0, 2.0).unwrap();
        assert!(rel(v, 0.135_335_283_236_612_7) < 1e-12);
        let v = upper_incomplete_gamma(1.5, 0.0).unwrap();
        assert!(rel(v, 0.886_226_925_5) < 1e-10);
        // Γ(2, z) = (z + 1) e^{-z}, across both branches.
        for z in [0.01, 0.5, 2.9, 3.1, 10.0, 50.0] {
            let v = upper_incomplete_gamma(2.0, z).unwrap();
            assert!(rel(v, (z + 1.0) * (-z).exp()) < 1e-12, "z={z}");
        }
        // Γ(1/2, z) = √π erfc(√z); erfc(1) = 0.15729920705028513
        let v = upper_incomplete_gamma(0.5, 1.0).unwrap();
        assert!(rel(v, PI.sqrt() * 0.157_299_207_050_285_13) < 1e-12);
    }

    #[test]
    fn incomplete_gamma_continuous_across_branches() {
        for a in [0.3, 1.3, 2.7] {
            let z = a + 1.0;
            let lo = gamma(a) - lower_gamma_series(a, z).unwrap();
            let hi = upper_gamma_cf(a, z).unwrap();
            assert!(rel(lo, hi) < 1e-12, "a={a}");
        }
    }

    #[test]
    fn incomplete_gamma_rejects_bad_domain() {
        assert!(upper_incomplete_gamma(0.0, 0.0).is_err());
        assert!(upper_incomplete_gamma(-1.0, 0.0).is_err());
        assert!(upper_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn zeta_identities() {
        assert!(rel(hurwitz_zeta(2.0, 1.0).unwrap(), PI * PI / 6.0) < 1e-14);
        assert!(rel(hurwitz_zeta(4.0, 1.0).unwrap(), PI.powi(4) / 90.0) < 1e-14);
        for s in [1.01, 1.3, 2.5, 7.0] {
            let d = hurwitz_zeta(s, 1.0).unwrap() - hurwitz_zeta(s, 2.0).unwrap();
            assert!((d - 1.0).abs() < 1e-12, "s={s}");
        }
        // ζ(2, 1/2) = π²/2
        assert!(rel(hurwitz_zeta(2.0, 0.5).unwrap(), PI * PI / 2.0) < 1e-14);
        assert!(hurwitz_zeta(1.0, 1.0).is_err());
        assert!(hurwitz_zeta(2.0, 0.0).is_err());
    }

    #[test]
    fn harmonic_small_cases() {
        assert!((generalized_harmonic(3, 1.0) - 11.0 / 6.0).abs() < 1e-15);
        for m in [0.0, 0.5, 1.0, 2.3] {
            assert_eq!(generalized_harmonic(1, m), 1.0);
        }
    }

    #[test]
    fn harmonic_large_order_uses_remainder() {
        // Past the direct limit, compare against the zeta difference.
        let n = 3 * HARMONIC_DIRECT_LIMIT;
        let m = 1.5;
        let direct = hurwitz_zeta(m, 1.0).unwrap() - hurwitz_zeta(m, n as f64 + 1.0).unwrap();
        assert!(rel(generalized_harmonic(n, m), direct) < 1e-12);
        // m = 1: H(n) ≈ ln n + γ + 1/(2n)
        let euler = 0.577_215_664_901_532_9;
        let nf = n as f64;
        let approx = nf.ln() + euler + 0.5 / nf - 1.0 / (12.0 * nf * nf);
        assert!(rel(generalized_harmonic(n, 1.0), approx) < 1e-13);
    }
}
