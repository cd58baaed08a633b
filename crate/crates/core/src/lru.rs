//! LRU map-cache evaluation: exact fixed-size simulation and one-pass stack
//! distance analysis.
//!
//! Stack distances use a Fenwick tree over "last access" slots. Every live
//! object owns one marked slot; the distance of a reuse is the number of
//! marked slots at or after the object's previous slot. Slots are handed out
//! in time order and periodically compacted, so the tree stays at about
//! twice the number of distinct objects and the whole pass is O(N log D).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::{CurveSource, MissRateCurve, MissRatePoint};
use crate::error::{invalid, Error, Result};
use crate::refstring::{ObjectId, ReferenceString};

const NONE: u32 = u32::MAX;

struct Fenwick {
    tree: Vec<i32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, i: usize, v: i32) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over slots `0..i`.
    fn prefix(&self, i: usize) -> i32 {
        let (mut i, mut s) = (i, 0);
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }
}

/// Incremental stack-distance computation.
pub struct StackDistanceAnalyzer {
    fenwick: Fenwick,
    /// Slot currently owned by each object.
    slot_of: Vec<u32>,
    /// Object owning each slot.
    owner: Vec<u32>,
    next_slot: usize,
    live: usize,
}

impl Default for StackDistanceAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl StackDistanceAnalyzer {
    pub fn new() -> Self {
        Self::with_capacity(1024)
    }

    fn with_capacity(cap: usize) -> Self {
        Self {
            fenwick: Fenwick::new(cap),
            slot_of: Vec::new(),
            owner: vec![NONE; cap],
            next_slot: 0,
            live: 0,
        }
    }

    /// Records a reference; returns its stack distance, or `None` on a first
    /// reference.
    pub fn access(&mut self, obj: ObjectId) -> Option<usize> {
        let k = obj.index();
        if k >= self.slot_of.len() {
            self.slot_of.resize(k + 1, NONE);
        }
        if self.next_slot == self.owner.len() {
            self.compact();
        }
        let prev = self.slot_of[k];
        let dist = if prev == NONE {
            self.live += 1;
            None
        } else {
            let p = prev as usize;
            let d = self.live as i32 - self.fenwick.prefix(p);
            self.fenwick.add(p, -1);
            self.owner[p] = NONE;
            Some(d as usize)
        };
        let s = self.next_slot;
        self.next_slot += 1;
        self.fenwick.add(s, 1);
        self.owner[s] = k as u32;
        self.slot_of[k] = s as u32;
        dist
    }

    /// Renumbers live slots to `0..live` and resizes to twice that.
    fn compact(&mut self) {
        let cap = (2 * self.live).max(1024);
        let mut owner = vec![NONE; cap];
        let mut fenwick = Fenwick::new(cap);
        let mut j = 0;
        for &o in self.owner[..self.next_slot].iter().filter(|&&o| o != NONE) {
            owner[j] = o;
            self.slot_of[o as usize] = j as u32;
            fenwick.add(j, 1);
            j += 1;
        }
        debug_assert_eq!(j, self.live);
        self.owner = owner;
        self.fenwick = fenwick;
        self.next_slot = j;
    }
}

/// Reuse-distance counts for a whole reference string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackDistanceHistogram {
    /// `bins[d]` counts reuses at stack distance `d`; index 0 is unused.
    pub bins: Vec<u64>,
    pub cold_misses: u64,
    pub total_refs: u64,
}

impl StackDistanceHistogram {
    /// Non-zero `(distance, count)` pairs.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.bins
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(d, &c)| (d, c))
    }

    /// Misses of an LRU cache with `size` entries.
    pub fn misses_at(&self, size: usize) -> u64 {
        let hits: u64 = self.bins.iter().take(size + 1).sum();
        self.total_refs - hits
    }
}

pub fn stack_distance_histogram(rs: &ReferenceString) -> StackDistanceHistogram {
    stack_distance_histogram_with_warmup(rs, 0)
}

/// Like [`stack_distance_histogram`], but the first `warmup` references only
/// prime the cache and are excluded from the counts.
pub fn stack_distance_histogram_with_warmup(
    rs: &ReferenceString,
    warmup: usize,
) -> StackDistanceHistogram {
    let mut an = StackDistanceAnalyzer::new();
    let mut bins = vec![0u64; rs.n_objects() + 1];
    let mut cold = 0;
    for (i, &r) in rs.refs().iter().enumerate() {
        let d = an.access(r);
        if i < warmup {
            continue;
        }
        match d {
            Some(d) => bins[d] += 1,
            None => cold += 1,
        }
    }
    StackDistanceHistogram {
        bins,
        cold_misses: cold,
        total_refs: rs.n_refs().saturating_sub(warmup) as u64,
    }
}

/// Miss rate at each size from the histogram tail sums.
pub fn miss_rate_curve(h: &StackDistanceHistogram, sizes: &[u64]) -> Result<MissRateCurve> {
    if h.total_refs == 0 {
        return Err(Error::EmptyTrace);
    }
    if sizes.contains(&0) {
        return Err(invalid("cache size must be at least 1"));
    }
    if sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("cache sizes must be sorted ascending"));
    }
    // hits_upto[d] = reuses with distance <= d
    let mut hits_upto = Vec::with_capacity(h.bins.len());
    let mut acc = 0u64;
    for &c in &h.bins {
        acc += c;
        hits_upto.push(acc);
    }
    let n = h.total_refs as f64;
    let points = sizes
        .iter()
        .map(|&s| {
            let idx = (s as usize).min(hits_upto.len() - 1);
            MissRatePoint {
                size: s as f64,
                miss_rate: (h.total_refs - hits_upto[idx]) as f64 / n,
            }
        })
        .collect();
    Ok(MissRateCurve::new(points, CurveSource::Empirical))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub size: usize,
    pub hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn total(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn miss_rate(&self) -> f64 {
        self.misses as f64 / self.total() as f64
    }
}

/// Writes `size,miss_rate` rows.
pub fn write_stats_csv<W: Write>(stats: &[CacheStats], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["size", "miss_rate"])?;
    for s in stats {
        out.write_record([s.size.to_string(), s.miss_rate().to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Exact simulation of a cold-start LRU cache with `size` entries.
pub fn simulate_lru_fixed(rs: &ReferenceString, size: usize) -> Result<CacheStats> {
    simulate_lru_fixed_with_warmup(rs, size, 0)
}

pub fn simulate_lru_fixed_with_warmup(
    rs: &ReferenceString,
    size: usize,
    warmup: usize,
) -> Result<CacheStats> {
    if size == 0 {
        return Err(invalid("cache size must be at least 1"));
    }
    if rs.n_refs() <= warmup {
        return Err(Error::EmptyTrace);
    }
    let d = rs.n_objects();
    // Doubly linked recency list over object ids; head is most recent.
    let mut prev = vec![NONE; d];
    let mut next = vec![NONE; d];
    let mut cached = vec![false; d];
    let (mut head, mut tail, mut len) = (NONE, NONE, 0usize);
    let (mut hits, mut misses) = (0u64, 0u64);

    for (i, r) in rs.refs().iter().enumerate() {
        let k = r.0;
        let hit = cached[k as usize];
        if hit {
            // unlink
            let (p, n) = (prev[k as usize], next[k as usize]);
            if p != NONE {
                next[p as usize] = n;
            } else {
                head = n;
            }
            if n != NONE {
                prev[n as usize] = p;
            } else {
                tail = p;
            }
        } else {
            if len == size {
                let victim = tail;
                let p = prev[victim as usize];
                tail = p;
                if p != NONE {
                    next[p as usize] = NONE;
                } else {
                    head = NONE;
                }
                cached[victim as usize] = false;
                len -= 1;
            }
            cached[k as usize] = true;
            len += 1;
        }
        // push front
        prev[k as usize] = NONE;
        next[k as usize] = head;
        if head != NONE {
            prev[head as usize] = k;
        }
        head = k;
        if tail == NONE {
            tail = k;
        }
        if i >= warmup {
            if hit {
                hits += 1;
            } else {
                misses += 1;
            }
        }
    }
    Ok(CacheStats { size, hits, misses })
}
