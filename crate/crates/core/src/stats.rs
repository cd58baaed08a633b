//! Empirical locality statistics of a reference string: popularity,
//! inter-reference distances and working-set curves.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::model::special::generalized_harmonic;
use crate::par;
use crate::prefixdb::{Prefix, PrefixTable};
use crate::refstring::{ObjectId, ReferenceString};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankEntry {
    /// 1-based popularity rank.
    pub rank: usize,
    pub object: ObjectId,
    pub count: u64,
    /// `count / N`.
    pub freq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankFrequencyTable {
    pub entries: Vec<RankEntry>,
    pub total_refs: u64,
}

impl RankFrequencyTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.count).collect()
    }

    /// `(rank, count)` pairs with `count >= min_count`, for log-log fitting.
    pub fn points(&self, min_count: u64) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.count >= min_count)
            .map(|e| (e.rank as f64, e.count as f64))
            .collect()
    }

    /// Zipf normalizing constant `Ω = 1/H(D, α)` for this table's size.
    pub fn omega(&self, alpha: f64) -> f64 {
        1.0 / generalized_harmonic(self.entries.len() as u64, alpha)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rank", "count", "freq"])?;
        for e in &self.entries {
            out.write_record([e.rank.to_string(), e.count.to_string(), e.freq.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ranks objects by descending reference count. Ties go to the object that
/// appears first in the string.
pub fn rank_frequency(rs: &ReferenceString) -> Result<RankFrequencyTable> {
    if rs.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let d = rs.n_objects();
    let mut counts = vec![0u64; d];
    let mut first = vec![usize::MAX; d];
    for (i, r) in rs.refs().iter().enumerate() {
        let k = r.index();
        counts[k] += 1;
        if first[k] == usize::MAX {
            first[k] = i;
        }
    }
    let mut order: Vec<usize> = (0..d).filter(|&k| counts[k] > 0).collect();
    order.sort_unstable_by(|&a, &b| counts[b].cmp(&counts[a]).then(first[a].cmp(&first[b])));
    let n = rs.n_refs() as u64;
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(i, k)| RankEntry {
            rank: i + 1,
            object: ObjectId(k as u32),
            count: counts[k],
            freq: counts[k] as f64 / n as f64,
        })
        .collect();
    Ok(RankFrequencyTable {
        entries,
        total_refs: n,
    })
}

/// Distances between successive references to the same object.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IrHistogram {
    pub bins: BTreeMap<u64, u64>,
    pub total: u64,
}

impl IrHistogram {
    pub fn from_distances(distances: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Self::default();
        for t in distances {
            *h.bins.entry(t).or_default() += 1;
            h.total += 1;
        }
        h
    }

    /// Number of distances strictly greater than `t`.
    pub fn count_above(&self, t: u64) -> u64 {
        self.bins.range(t + 1..).map(|(_, c)| c).sum()
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.bins.iter().map(|(&t, &c)| t as f64 * c as f64).sum();
        s / self.total as f64
    }

    /// Geometric bins `[base^i, base^(i+1))` reported as (bin center, count per
    /// unit distance). Empty bins are skipped.
    pub fn log_binned(&self, base: f64) -> Result<Vec<(f64, f64)>> {
        if !(base > 1.0) {
            return Err(invalid(format!("log bin base {base} must exceed 1")));
        }
        let mut out = Vec::new();
        let mut lo = 1.0f64;
        let mut iter = self.bins.iter().peekable();
        while iter.peek().is_some() {
            let hi = (lo * base).max(lo + 1.0);
            let (a, b) = (lo.ceil() as u64, hi.ceil() as u64);
            let mut c = 0u64;
            while let Some((&t, &n)) = iter.peek() {
                if t >= b {
                    break;
                }
                debug_assert!(t >= a);
                c += n;
                iter.next();
            }
            if c > 0 {
                let width = (b - a) as f64;
                out.push((((a as f64) * (b - 1) as f64).sqrt(), c as f64 / width));
            }
            lo = hi;
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "count"])?;
        for (t, c) in &self.bins {
            out.write_record([t.to_string(), c.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    fn cdf_steps(&self) -> Vec<(u64, f64)> {
        let mut acc = 0u64;
        self.bins
            .iter()
            .map(|(&t, &c)| {
                acc += c;
                (t, acc as f64 / self.total as f64)
            })
            .collect()
    }
}

/// Two-sample Kolmogorov–Smirnov statistic between two distance distributions.
pub fn ks_statistic(a: &IrHistogram, b: &IrHistogram) -> Result<f64> {
    if a.total == 0 || b.total == 0 {
        return Err(invalid("KS statistic needs two non-empty histograms"));
    }
    let (fa, fb) = (a.cdf_steps(), b.cdf_steps());
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < fa.len() || j < fb.len() {
        let ta = fa.get(i).map_or(u64::MAX, |x| x.0);
        let tb = fb.get(j).map_or(u64::MAX, |x| x.0);
        let t = ta.min(tb);
        if ta == t {
            ca = fa[i].1;
            i += 1;
        }
        if tb == t {
            cb = fb[j].1;
            j += 1;
        }
        d = d.max((ca - cb).abs());
    }
    Ok(d)
}

/// Position of the previous reference to the same object, per position.
fn previous_positions(rs: &ReferenceString) -> Vec<Option<usize>> {
    let mut last = vec![usize::MAX; rs.n_objects()];
    rs.refs()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = std::mem::replace(&mut last[r.index()], i);
            (p != usize::MAX).then_some(p)
        })
        .collect()
}

pub fn inter_reference_histogram(rs: &ReferenceString) -> IrHistogram {
    IrHistogram::from_distances(
        previous_positions(rs)
            .into_iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i - p) as u64)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkingSetPoint {
    /// Window length T in references.
    pub window: usize,
    /// Mean number of distinct objects over all complete windows.
    pub avg_size: f64,
    pub miss_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkingSetCurve {
    pub points: Vec<WorkingSetPoint>,
}

impl WorkingSetCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["T", "avg_size", "miss_rate"])?;
        for p in &self.points {
            out.write_record([
                p.window.to_string(),
                p.avg_size.to_string(),
                p.miss_rate.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Average working-set size and miss rate for each window length.
///
/// `s(T)` averages the distinct-object count over windows ending at
/// `t = T..=N`. A position `i` is counted in window `t` when it is the last
/// reference to its object inside that window, so every position contributes
/// an interval of window ends and the average is O(N) per window length.
pub fn working_set_curve(rs: &ReferenceString, windows: &[usize]) -> Result<WorkingSetCurve> {
    let n = rs.n_refs();
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    if let Some(&t) = windows.iter().find(|&&t| t == 0 || t > n) {
        return Err(invalid(format!("window {t} outside 1..={n}")));
    }
    // 1-based position of the next reference to the same object (n+1 if none).
    let mut next = vec![n + 1; n + 1];
    let mut seen = vec![n + 1; rs.n_objects()];
    for (i, r) in rs.refs().iter().enumerate().rev() {
        next[i + 1] = std::mem::replace(&mut seen[r.index()], i + 1);
    }
    let hist = inter_reference_histogram(rs);
    let cold = (n as u64) - hist.total;
    let points = par::map(windows, |&t| {
        let mut total: u64 = 0;
        for (i, &nx) in next.iter().enumerate().skip(1) {
            let hi = (i + t - 1).min(n).min(nx - 1);
            let lo = i.max(t);
            if hi >= lo {
                total += (hi - lo + 1) as u64;
            }
        }
        WorkingSetPoint {
            window: t,
            avg_size: total as f64 / (n - t + 1) as f64,
            miss_rate: (cold + hist.count_above(t as u64)) as f64 / n as f64,
        }
    });
    Ok(WorkingSetCurve { points })
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid(
            "spearman needs two equal-length samples of size >= 2",
        ));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation between prefix length and reference count. Every
/// object symbol must be a CIDR prefix present in `table`.
pub fn length_frequency_correlation(
    rft: &RankFrequencyTable,
    symbols: &[String],
    table: &PrefixTable,
) -> Result<f64> {
    let mut lens = Vec::with_capacity(rft.len());
    let mut counts = Vec::with_capacity(rft.len());
    for e in &rft.entries {
        let sym = symbols
            .get(e.object.index())
            .ok_or_else(|| invalid(format!("object {} has no symbol", e.object.0)))?;
        let p: Prefix = sym
            .parse()
            .map_err(|_| Error::Domain(format!("object {sym:?} is not a CIDR prefix")))?;
        if !table.contains(&p) {
            return Err(Error::Domain(format!(
                "prefix {p} is not in the routing table"
            )));
        }
        lens.push(p.len() as f64);
        counts.push(e.count as f64);
    }
    spearman(&lens, &counts)
}
