//! Piecewise power-law fits in log-log space.
//!
//! All fits are ordinary least squares on `(log10 x, log10 y)`. Breakpoint
//! search scores candidate splits with prefix sums, so each candidate costs
//! O(1) after an O(n) setup.

use serde::{Deserialize, Serialize};

use crate::curve::log_space;
use crate::error::{invalid, Error, Result};
use crate::par;

/// Minimum points per fitted segment.
pub const MIN_SEGMENT_POINTS: usize = 3;
/// Default number of log-spaced breakpoint candidates.
pub const DEFAULT_GRID: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares in log10 space.
    pub sse: f64,
    pub n_points: usize,
}

impl LineFit {
    /// Fitted `y` at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        10f64.powf(self.intercept + self.slope * x.log10())
    }
}

fn to_log(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .map(|&(x, y)| {
            if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
                Ok((x.log10(), y.log10()))
            } else {
                Err(invalid(format!(
                    "non-positive point ({x}, {y}) in log-log fit"
                )))
            }
        })
        .collect()
}

fn ols(lp: &[(f64, f64)]) -> Result<LineFit> {
    if lp.len() < MIN_SEGMENT_POINTS {
        return Err(invalid(format!(
            "need at least {MIN_SEGMENT_POINTS} points, got {}",
            lp.len()
        )));
    }
    let n = lp.len() as f64;
    let mx = lp.iter().map(|p| p.0).sum::<f64>() / n;
    let my = lp.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in lp {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(invalid("all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = lp
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        sse,
        n_points: lp.len(),
    })
}

/// Fits `y = 10^b · x^a` to the points with `x` inside `[lo, hi]`.
pub fn fit_loglog_segment(points: &[(f64, f64)], x_range: (f64, f64)) -> Result<LineFit> {
    let (lo, hi) = x_range;
    let inside: Vec<_> = points
        .iter()
        .copied()
        .filter(|&(x, _)| x >= lo && x <= hi)
        .collect();
    ols(&to_log(&inside)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x_lo: f64,
    pub x_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub sse: f64,
    pub n_points: usize,
}

impl Segment {
    pub fn eval(&self, x: f64) -> f64 {
        10f64.powf(self.intercept + self.slope * x.log10())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    pub segments: Vec<Segment>,
    pub breakpoints: Vec<f64>,
    pub sse: f64,
}

impl PiecewiseFit {
    pub fn slopes(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.slope).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Running sums for O(1) least-squares on any index range.
struct Sums {
    x: Vec<f64>,
    y: Vec<f64>,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: Vec<f64>,
}

impl Sums {
    fn new(lp: &[(f64, f64)]) -> Self {
        let mut s = Sums {
            x: vec![0.0],
            y: vec![0.0],
            xx: vec![0.0],
            xy: vec![0.0],
            yy: vec![0.0],
        };
        for &(x, y) in lp {
            s.x.push(s.x.last().unwrap() + x);
            s.y.push(s.y.last().unwrap() + y);
            s.xx.push(s.xx.last().unwrap() + x * x);
            s.xy.push(s.xy.last().unwrap() + x * y);
            s.yy.push(s.yy.last().unwrap() + y * y);
        }
        s
    }

    /// SSE of the OLS line over `[i, j)`.
    fn sse(&self, i: usize, j: usize) -> f64 {
        let n = (j - i) as f64;
        let sx = self.x[j] - self.x[i];
        let sy = self.y[j] - self.y[i];
        let cxx = self.xx[j] - self.xx[i] - sx * sx / n;
        let cxy = self.xy[j] - self.xy[i] - sx * sy / n;
        let cyy = self.yy[j] - self.yy[i] - sy * sy / n;
        if cxx <= 0.0 {
            return f64::INFINITY;
        }
        (cyy - cxy * cxy / cxx).max(0.0)
    }
}

/// Fits `n_segments` (2 or 3) contiguous power laws to points sorted by x.
///
/// Segment `i` covers `[b_{i-1}, b_i)` where the `b` are chosen from
/// `candidate_breaks` (default: [`DEFAULT_GRID`] log-spaced values strictly
/// inside the data range) to minimize the total SSE. Ties go to the smallest
/// breakpoints.
pub fn fit_piecewise(
    points: &[(f64, f64)],
    n_segments: usize,
    candidate_breaks: Option<&[f64]>,
) -> Result<PiecewiseFit> {
    if !(1..=3).contains(&n_segments) {
        return Err(invalid(format!(
            "n_segments must be 1, 2 or 3, got {n_segments}"
        )));
    }
    if points.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(invalid("points must be sorted by x"));
    }
    let lp = to_log(points)?;
    if lp.len() < MIN_SEGMENT_POINTS * n_segments {
        return Err(invalid(format!(
            "{} points cannot form {n_segments} segments of {MIN_SEGMENT_POINTS}",
            lp.len()
        )));
    }
    let (x_min, x_max) = (points[0].0, points[points.len() - 1].0);
    let mut cands: Vec<f64> = match candidate_breaks {
        Some(c) => c.to_vec(),
        None => {
            let g = log_space(x_min, x_max, DEFAULT_GRID + 2);
            g[1..g.len() - 1].to_vec()
        }
    };
    cands.retain(|b| b.is_finite() && *b > x_min && *b <= x_max);
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    let sums = Sums::new(&lp);
    let n = lp.len();
    let split = |b: f64| points.partition_point(|p| p.0 < b);
    let idx: Vec<usize> = cands.iter().map(|&b| split(b)).collect();
    let ok = |i: usize, j: usize| j >= i + MIN_SEGMENT_POINTS;

    // (sse, break indices into `cands`)
    let best: Option<(f64, Vec<usize>)> = match n_segments {
        1 => Some((sums.sse(0, n), vec![])),
        2 => (0..cands.len())
            .filter(|&a| ok(0, idx[a]) && ok(idx[a], n))
            .map(|a| (sums.sse(0, idx[a]) + sums.sse(idx[a], n), vec![a]))
            .fold(None, pick),
        _ => par::map_range(cands.len(), |a| {
            if !ok(0, idx[a]) {
                return None;
            }
            let head = sums.sse(0, idx[a]);
            (a + 1..cands.len())
                .filter(|&b| ok(idx[a], idx[b]) && ok(idx[b], n))
                .map(|b| {
                    (
                        head + sums.sse(idx[a], idx[b]) + sums.sse(idx[b], n),
                        vec![a, b],
                    )
                })
                .fold(None, pick)
        })
        .into_iter()
        .flatten()
        .fold(None, pick),
    };
    let (_, chosen) = best.ok_or_else(|| {
        invalid(format!(
            "no breakpoint candidates leave {MIN_SEGMENT_POINTS} points per segment"
        ))
    })?;

    let breakpoints: Vec<f64> = chosen.iter().map(|&c| cands[c]).collect();
    let mut bounds = vec![0];
    bounds.extend(chosen.iter().map(|&c| idx[c]));
    bounds.push(n);
    let mut edges = vec![x_min];
    edges.extend(&breakpoints);
    edges.push(x_max);
    let mut segments = Vec::with_capacity(n_segments);
    for k in 0..n_segments {
        let f = ols(&lp[bounds[k]..bounds[k + 1]])?;
        segments.push(Segment {
            x_lo: edges[k],
            x_hi: edges[k + 1],
            slope: f.slope,
            intercept: f.intercept,
            sse: f.sse,
            n_points: f.n_points,
        });
    }
    let sse = segments.iter().map(|s| s.sse).sum();
    Ok(PiecewiseFit {
        segments,
        breakpoints,
        sse,
    })
}

/// Keeps the lower SSE. SSEs within rounding noise of each other count as a
/// tie, which goes to the earlier (smaller) breaks; callers feed candidates
/// in ascending break order.
fn pick(best: Option<(f64, Vec<usize>)>, cand: (f64, Vec<usize>)) -> Option<(f64, Vec<usize>)> {
    match best {
        Some(b) if !(cand.0 < b.0 - 1e-12 * (1.0 + b.0.abs())) => Some(b),
        _ => Some(cand),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularityExponents {
    /// Frequency-domain exponents, one per segment.
    pub alphas: Vec<f64>,
    /// Normalized frequencies at the breakpoints.
    pub crossover_freqs: Vec<f64>,
}

/// Converts a rank-count fit into frequency-domain exponents
/// `α_i = 1 + 1/|s_i|`.
///
/// The crossover frequency at each breakpoint is the fitted count there
/// (geometric mean of the two adjoining segments) divided by `total_refs`.
pub fn popularity_exponents(fit: &PiecewiseFit, total_refs: f64) -> Result<PopularityExponents> {
    if !(total_refs > 0.0) {
        return Err(invalid("total_refs must be positive"));
    }
    if let Some(s) = fit.segments.iter().find(|s| s.slope >= 0.0) {
        return Err(Error::Domain(format!(
            "slope {} is not a decaying power law",
            s.slope
        )));
    }
    let alphas = fit
        .segments
        .iter()
        .map(|s| 1.0 + 1.0 / s.slope.abs())
        .collect();
    let crossover_freqs = fit
        .breakpoints
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (l, r) = (&fit.segments[i], &fit.segments[i + 1]);
            (l.eval(b) * r.eval(b)).sqrt() / total_refs
        })
        .collect();
    Ok(PopularityExponents {
        alphas,
        crossover_freqs,
    })
}

/// How a frequency-domain exponent maps onto miss-rate behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissRegime {
    /// `1 < α < 2`: miss rate decays as a power of the cache size.
    Decaying,
    /// `α = 2`: logarithmic regime with a bounded cache size.
    Logarithmic,
    /// `α > 2`: the power law would grow; outside the model's domain.
    OutOfDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissSlope {
    pub slope: f64,
    pub regime: MissRegime,
}

/// Miss-rate log-log slope `1 - 1/(α - 1)` for a popularity exponent.
pub fn missrate_slope_from_alpha(alpha: f64) -> Result<MissSlope> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid(format!("exponent {alpha} must exceed 1")));
    }
    let regime = if alpha == 2.0 {
        MissRegime::Logarithmic
    } else if alpha > 2.0 {
        MissRegime::OutOfDomain
    } else {
        MissRegime::Decaying
    };
    Ok(MissSlope {
        slope: 1.0 - 1.0 / (alpha - 1.0),
        regime,
    })
}
