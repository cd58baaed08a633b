//! Analytic miss-rate model for LRU caches under generalized-Zipf popularity.

pub mod gzipf;
pub mod quad;
pub mod special;
pub mod three_region;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use gzipf::{
    gzipf_pdf, inter_ref_asymptotic, inter_ref_exact_head, miss_rate_of_size,
    miss_rate_of_size_unclamped, normalization_c, sensitivity_curve, size_of_miss_rate,
    size_of_miss_rate_q2, ExponentSweep, GZipfParams, GZipfSpec,
};
pub use special::{generalized_harmonic, hurwitz_zeta, upper_incomplete_gamma};
pub use three_region::{three_region_miss_curve, ThreeRegionParams, ThreeRegionSpec};

use crate::curve::{CurveSource, MissRateCurve, MissRatePoint};
use crate::error::Result;

/// Anything that predicts a miss rate for a cache size.
pub trait MissRateModel {
    /// Miss rate before clamping to 1.
    fn miss_rate_unclamped(&self, size: f64) -> Result<f64>;

    fn miss_rate(&self, size: f64) -> Result<f64> {
        Ok(self.miss_rate_unclamped(size)?.min(1.0))
    }

    /// Evaluates the model at `sizes`; the flag reports whether any point was clamped.
    fn curve(&self, sizes: &[f64]) -> Result<(MissRateCurve, bool)> {
        let mut clamped = false;
        let points = sizes
            .iter()
            .map(|&size| {
                let m = self.miss_rate_unclamped(size)?;
                clamped |= m > 1.0;
                Ok(MissRatePoint {
                    size,
                    miss_rate: m.min(1.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((MissRateCurve::new(points, CurveSource::Analytic), clamped))
    }
}

impl MissRateModel for GZipfParams {
    fn miss_rate_unclamped(&self, size: f64) -> Result<f64> {
        miss_rate_of_size_unclamped(size, self)
    }
}

impl MissRateModel for ThreeRegionParams {
    fn miss_rate_unclamped(&self, size: f64) -> Result<f64> {
        ThreeRegionParams::miss_rate_unclamped(self, size)
    }
}

/// A model parameter file: `{"model": "gzipf", ...}` or `{"model": "three_region", ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Gzipf(GZipfParams),
    ThreeRegion(ThreeRegionParams),
}

impl ModelParams {
    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

impl MissRateModel for ModelParams {
    fn miss_rate_unclamped(&self, size: f64) -> Result<f64> {
        match self {
            ModelParams::Gzipf(p) => p.miss_rate_unclamped(size),
            ModelParams::ThreeRegion(p) => p.miss_rate_unclamped(size),
        }
    }
}
