//! End-to-end experiments built from the other modules: model-vs-empirical
//! comparison, cache-size scaling, and three-regime model fitting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::MissRateCurve;
use crate::error::{invalid, Error, Result};
use crate::lru::{miss_rate_curve, stack_distance_histogram};
use crate::model::{MissRateModel, ThreeRegionParams};
use crate::par;
use crate::powerfit::{fit_piecewise, popularity_exponents, PiecewiseFit, PopularityExponents};
use crate::stats::RankFrequencyTable;
use crate::synth::{generate_irm, rank_probabilities, RankLaw};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub size: f64,
    pub m_empirical: f64,
    pub m_model: f64,
    /// `log10(m_model / m_empirical)`.
    pub log10_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub s_min: f64,
    /// Largest `|log10_ratio|` among rows with `size >= s_min`.
    pub max_abs_log10_ratio: f64,
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["size", "m_empirical", "m_model", "log10_ratio"])?;
        for r in &self.rows {
            out.write_record([
                r.size.to_string(),
                r.m_empirical.to_string(),
                r.m_model.to_string(),
                r.log10_ratio.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evaluates `model` at every empirical size and reports the log ratio.
pub fn compare_curves<M: MissRateModel + ?Sized>(
    empirical: &MissRateCurve,
    model: &M,
    s_min: f64,
) -> Result<Comparison> {
    if !empirical.points.iter().any(|p| p.size >= s_min) {
        return Err(Error::Domain(format!(
            "disjoint size ranges: no empirical size reaches s_min = {s_min}"
        )));
    }
    let rows = empirical
        .points
        .iter()
        .map(|p| {
            let m = model.miss_rate(p.size)?;
            if !(p.miss_rate > 0.0) {
                return Err(Error::Domain(format!(
                    "empirical miss rate 0 at size {}",
                    p.size
                )));
            }
            Ok(CompareRow {
                size: p.size,
                m_empirical: p.miss_rate,
                m_model: m,
                log10_ratio: (m / p.miss_rate).log10(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_log10_ratio = rows
        .iter()
        .filter(|r| r.size >= s_min)
        .map(|r| r.log10_ratio.abs())
        .fold(0.0, f64::max);
    Ok(Comparison {
        rows,
        s_min,
        max_abs_log10_ratio,
    })
}

/// Synthetic workload used by the scaling experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub law: RankLaw,
    pub n_refs: usize,
    pub seed: u64,
    /// Scale D and the crossover rank along with N (popularity shape fixed).
    pub scale_objects: bool,
    pub target_miss_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub factor: f64,
    pub n_refs: usize,
    pub d_objects: usize,
    pub size_at_target: f64,
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["factor", "N", "D", "s_at_fixed_m"])?;
    for r in rows {
        out.write_record([
            r.factor.to_string(),
            r.n_refs.to_string(),
            r.d_objects.to_string(),
            r.size_at_target.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Empirical LRU miss rate at every cache size `1..=D_seen`.
pub fn full_empirical_curve(rs: &crate::ReferenceString) -> Result<MissRateCurve> {
    let h = stack_distance_histogram(rs);
    let sizes: Vec<u64> = (1..=rs.n_objects() as u64).collect();
    miss_rate_curve(&h, &sizes)
}

/// For each factor, generates a trace with `N·factor` references (and, if
/// configured, `D·factor` objects with the crossover rank scaled alike) and
/// reports the cache size reaching the target miss rate.
pub fn scaling_experiment(cfg: &ScalingConfig, factors: &[f64]) -> Result<Vec<ScalingRow>> {
    if let Some(f) = factors.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(invalid(format!("scaling factor {f} must be positive")));
    }
    let jobs: Vec<Result<ScalingRow>> = par::map(factors, |&f| {
        let n = (cfg.n_refs as f64 * f).round() as usize;
        let law = if cfg.scale_objects {
            let d = (cfg.law.d_objects as f64 * f).round() as usize;
            let kc = ((cfg.law.crossover_rank as f64 * f).round() as usize).clamp(1, d.max(1));
            RankLaw::new(d, cfg.law.head_exponent, cfg.law.tail_exponent, kc)?
        } else {
            cfg.law
        };
        let rs = generate_irm(&rank_probabilities(&law), n, cfg.seed)?;
        let curve = full_empirical_curve(&rs)?;
        Ok(ScalingRow {
            factor: f,
            n_refs: n,
            d_objects: law.d_objects,
            size_at_target: curve.size_at_miss_rate(cfg.target_miss_rate)?,
        })
    });
    jobs.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeRegionFitOptions {
    /// Ranks with fewer references are dropped before fitting.
    pub min_count: u64,
    /// Optional inclusive rank range to fit.
    pub rank_range: Option<(f64, f64)>,
    /// Breakpoint candidates; `None` uses the default log grid.
    pub candidate_breaks: Option<Vec<f64>>,
}

impl Default for ThreeRegionFitOptions {
    fn default() -> Self {
        Self {
            min_count: 5,
            rank_range: None,
            candidate_breaks: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThreeRegionFit {
    pub fit: PiecewiseFit,
    pub exponents: PopularityExponents,
    pub params: ThreeRegionParams,
}

/// Fits three power laws to the rank-frequency curve and builds the matching
/// three-regime miss-rate model.
pub fn fit_three_region(
    rft: &RankFrequencyTable,
    opts: &ThreeRegionFitOptions,
) -> Result<ThreeRegionFit> {
    let (lo, hi) = opts.rank_range.unwrap_or((1.0, f64::INFINITY));
    let points: Vec<(f64, f64)> = rft
        .points(opts.min_count)
        .into_iter()
        .filter(|&(k, _)| k >= lo && k <= hi)
        .collect();
    let fit = fit_piecewise(&points, 3, opts.candidate_breaks.as_deref())?;
    let exponents = popularity_exponents(&fit, rft.total_refs as f64)?;
    let a = &exponents.alphas;
    let nu = &exponents.crossover_freqs;
    let params = ThreeRegionParams::new([a[0], a[1], a[2]], [nu[0], nu[1]], rft.total_refs)?;
    Ok(ThreeRegionFit {
        fit,
        exponents,
        params,
    })
}
