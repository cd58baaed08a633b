//! Miss-rate curves (cache size → miss rate), shared by the simulator and the
//! analytic model.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    Analytic,
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissRatePoint {
    /// Cache size in entries.
    pub size: f64,
    pub miss_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissRateCurve {
    pub points: Vec<MissRatePoint>,
    pub source: CurveSource,
}

impl MissRateCurve {
    pub fn new(points: Vec<MissRatePoint>, source: CurveSource) -> Self {
        Self { points, source }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.size)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].miss_rate <= w[0].miss_rate)
    }

    /// Cache size reaching `target`, by log-log interpolation between the
    /// two bracketing points.
    pub fn size_at_miss_rate(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(invalid(format!("target miss rate {target} outside (0, 1]")));
        }
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.miss_rate == target {
                return Ok(a.size);
            }
            if a.miss_rate > target && b.miss_rate <= target {
                if b.miss_rate == target {
                    return Ok(b.size);
                }
                let (x0, x1) = (a.size.ln(), b.size.ln());
                let (y0, y1) = (a.miss_rate.ln(), b.miss_rate.ln());
                let x = x0 + (target.ln() - y0) * (x1 - x0) / (y1 - y0);
                return Ok(x.exp());
            }
        }
        match self.points.last() {
            Some(p) if p.miss_rate == target => Ok(p.size),
            _ => {
                let (lo, hi) = self
                    .points
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(l, h), p| {
                        (l.min(p.miss_rate), h.max(p.miss_rate))
                    });
                Err(Error::Domain(format!(
                    "target miss rate {target} outside achieved range [{lo}, {hi}]"
                )))
            }
        }
    }

    /// Writes `size,miss_rate` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["size", "miss_rate"])?;
        for p in &self.points {
            out.write_record([p.size.to_string(), p.miss_rate.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `size,miss_rate` rows (header required).
    pub fn read_csv<R: Read>(r: R, source: CurveSource) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut points = Vec::new();
        for rec in rdr.deserialize() {
            let p: MissRatePoint = rec?;
            if !(p.size > 0.0 && (0.0..=1.0).contains(&p.miss_rate)) {
                return Err(invalid(format!("bad curve row {p:?}")));
            }
            points.push(p);
        }
        if points.is_empty() {
            return Err(invalid("curve has no rows"));
        }
        Ok(Self { points, source })
    }
}

/// `steps` log-spaced integer sizes from `lo` to `hi` inclusive, deduplicated.
pub fn log_sizes(lo: u64, hi: u64, steps: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo || steps == 0 {
        return Err(invalid(format!("bad log grid {lo}:{hi}:{steps}")));
    }
    if steps == 1 || lo == hi {
        return Ok(vec![lo]);
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..steps)
        .map(|i| (a + (b - a) * i as f64 / (steps - 1) as f64).exp().round() as u64)
        .map(|s| s.clamp(lo, hi))
        .collect();
    out.dedup();
    Ok(out)
}

/// `steps` log-spaced reals from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|i| (a + (b - a) * i as f64 / (steps - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pts: &[(f64, f64)]) -> MissRateCurve {
        MissRateCurve::new(
            pts.iter()
                .map(|&(size, miss_rate)| MissRatePoint { size, miss_rate })
                .collect(),
            CurveSource::Empirical,
        )
    }

    #[test]
    fn interpolates_in_log_log() {
        // m = s^-1 between the two points.
        let c = curve(&[(1.0, 1.0), (100.0, 0.01)]);
        let s = c.size_at_miss_rate(0.1).unwrap();
        assert!((s - 10.0).abs() < 1e-9);
        assert_eq!(c.size_at_miss_rate(0.01).unwrap(), 100.0);
        assert!(c.size_at_miss_rate(0.001).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = curve(&[(1.0, 0.5), (10.0, 0.25)]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "size,miss_rate\n1,0.5\n10,0.25\n"
        );
        let back = MissRateCurve::read_csv(buf.as_slice(), CurveSource::Empirical).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn log_grid() {
        assert_eq!(log_sizes(1, 1000, 4).unwrap(), [1, 10, 100, 1000]);
        assert_eq!(log_sizes(1, 3, 10).unwrap(), [1, 2, 3]);
        assert!(log_sizes(0, 10, 3).is_err());
    }
}
