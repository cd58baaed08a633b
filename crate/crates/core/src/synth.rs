//! Synthetic reference strings under the independent reference model.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`. Generation is
//! split into fixed chunks of [`CHUNK`] references; chunk `i` draws from
//! stream `i` of the seeded generator, so output is identical whether chunks
//! run sequentially or in parallel.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::refstring::{ObjectId, ReferenceString};

/// References per generator stream.
pub const CHUNK: usize = 1 << 16;

/// Two-regime power law over popularity ranks.
///
/// `p(k) ∝ k^-β₁` up to the crossover rank `k_c`, continued as
/// `k_c^-β₁ (k/k_c)^-β₂` beyond it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankLaw {
    pub d_objects: usize,
    pub head_exponent: f64,
    pub tail_exponent: f64,
    pub crossover_rank: usize,
}

impl RankLaw {
    pub fn new(
        d_objects: usize,
        head_exponent: f64,
        tail_exponent: f64,
        crossover_rank: usize,
    ) -> Result<Self> {
        if d_objects < 2 {
            return Err(invalid(format!("need at least 2 objects, got {d_objects}")));
        }
        if !(head_exponent >= 0.0 && tail_exponent >= head_exponent && tail_exponent.is_finite()) {
            return Err(invalid(format!(
                "rank exponents must satisfy 0 <= head ({head_exponent}) <= tail ({tail_exponent})"
            )));
        }
        if !(1..=d_objects).contains(&crossover_rank) {
            return Err(invalid(format!(
                "crossover rank {crossover_rank} outside 1..={d_objects}"
            )));
        }
        Ok(Self {
            d_objects,
            head_exponent,
            tail_exponent,
            crossover_rank,
        })
    }

    /// Rank law whose frequency-domain exponents are `q` (head) and `r`
    /// (tail), using `β = 1/(a - 1)`.
    pub fn from_gzipf_exponents(
        d_objects: usize,
        q: f64,
        r: f64,
        crossover_rank: usize,
    ) -> Result<Self> {
        if !(q > 1.0 && r > 1.0) {
            return Err(invalid(format!(
                "frequency exponents q={q}, r={r} must exceed 1"
            )));
        }
        Self::new(d_objects, 1.0 / (q - 1.0), 1.0 / (r - 1.0), crossover_rank)
    }

    /// Equal popularity for every object.
    pub fn uniform(d_objects: usize) -> Result<Self> {
        Self::new(d_objects, 0.0, 0.0, d_objects)
    }

    /// Unnormalized weight of rank `k` (1-based).
    pub fn weight(&self, k: usize) -> f64 {
        let k = k as f64;
        let kc = self.crossover_rank as f64;
        if k <= kc {
            k.powf(-self.head_exponent)
        } else {
            kc.powf(-self.head_exponent) * (k / kc).powf(-self.tail_exponent)
        }
    }
}

/// Probability of each rank `1..=D`, summing to exactly 1.
pub fn rank_probabilities(law: &RankLaw) -> Vec<f64> {
    let w: Vec<f64> = (1..=law.d_objects).map(|k| law.weight(k)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let last = p.len() - 1;
    let head: f64 = p[..last].iter().sum();
    p[last] = 1.0 - head;
    p
}

/// Draws `n` independent references from `probs` by inverse-CDF search.
///
/// Object ids are assigned in first-seen order; each object's symbol is its
/// 1-based rank.
pub fn generate_irm(probs: &[f64], n: usize, seed: u64) -> Result<ReferenceString> {
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(invalid("probabilities must be non-negative and finite"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("probabilities sum to {total}, not 1")));
    }
    let mut cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let last = cdf.len() - 1;
    cdf[last] = f64::INFINITY;

    let mut ranks = vec![0u32; n];
    par::for_each_chunk_mut(&mut ranks, CHUNK, |chunk_idx, out| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk_idx as u64);
        for slot in out {
            let u: f64 = rng.random();
            *slot = cdf.partition_point(|&c| c <= u) as u32;
        }
    });

    const NONE: u32 = u32::MAX;
    let mut ids = vec![NONE; probs.len()];
    let mut symbols = Vec::new();
    let refs = ranks
        .into_iter()
        .map(|k| {
            let slot = &mut ids[k as usize];
            if *slot == NONE {
                *slot = symbols.len() as u32;
                symbols.push((k + 1).to_string());
            }
            ObjectId(*slot)
        })
        .collect();
    Ok(ReferenceString::from_parts_unchecked(refs, symbols))
}

/// Uniform random permutation of the references (same ids and symbols).
pub fn irm_shuffle(rs: &ReferenceString, seed: u64) -> Result<ReferenceString> {
    if rs.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut refs = rs.refs().to_vec();
    refs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ReferenceString::from_parts_unchecked(
        refs,
        rs.symbols().to_vec(),
    ))
}
