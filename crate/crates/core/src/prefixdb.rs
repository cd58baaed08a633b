//! IPv4 prefix tables: parsing, more-specific filtering and longest-prefix
//! match, plus mapping of packet traces onto prefix reference strings.

use std::fmt;
use std::io::BufRead;
use std::net::Ipv4Addr;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::refstring::{ObjectId, PacketRecord, PacketTrace, ReferenceString};

#[inline]
fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

/// An IPv4 CIDR prefix with all host bits cleared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    network: u32,
    len: u8,
}

impl Prefix {
    /// Builds a prefix, rejecting set host bits.
    pub fn new(network: u32, len: u8) -> Result<Self> {
        if len > 32 {
            return Err(invalid(format!("prefix length {len} > 32")));
        }
        if network & !mask(len) != 0 {
            return Err(invalid(format!(
                "{}/{len} has host bits set",
                Ipv4Addr::from(network)
            )));
        }
        Ok(Self { network, len })
    }

    /// Builds a prefix, clearing host bits. The flag reports whether any were set.
    pub fn new_masked(network: u32, len: u8) -> Result<(Self, bool)> {
        if len > 32 {
            return Err(invalid(format!("prefix length {len} > 32")));
        }
        let masked = network & mask(len);
        Ok((
            Self {
                network: masked,
                len,
            },
            masked != network,
        ))
    }

    pub fn network(&self) -> u32 {
        self.network
    }

    pub fn addr(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.network)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr & mask(self.len) == self.network
    }

    /// True when `other`'s address range lies inside this prefix (or equals it).
    pub fn covers(&self, other: &Prefix) -> bool {
        self.len <= other.len && self.contains(other.network)
    }

    #[inline]
    fn bit(addr: u32, depth: u8) -> usize {
        ((addr >> (31 - u32::from(depth))) & 1) as usize
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.network), self.len)
    }
}

/// Parses `a.b.c.d/len`, clearing host bits; the flag reports masking.
fn parse_cidr(s: &str) -> Result<(Prefix, bool)> {
    let (addr, len) = s
        .split_once('/')
        .ok_or_else(|| invalid(format!("{s:?} is not in a.b.c.d/len form")))?;
    let addr: Ipv4Addr = addr
        .parse()
        .map_err(|_| invalid(format!("bad address in {s:?}")))?;
    let len: u8 = len
        .parse()
        .map_err(|_| invalid(format!("bad length in {s:?}")))?;
    Prefix::new_masked(u32::from(addr), len)
}

impl FromStr for Prefix {
    type Err = Error;

    /// Strict parse: host bits must already be clear.
    fn from_str(s: &str) -> Result<Self> {
        match parse_cidr(s)? {
            (p, false) => Ok(p),
            (_, true) => Err(invalid(format!("{s} has host bits set"))),
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    child: [u32; 2],
    /// Index into `PrefixTable::prefixes`, or `NONE`.
    prefix: u32,
}

impl Node {
    const EMPTY: Node = Node {
        child: [NONE, NONE],
        prefix: NONE,
    };
}

/// An immutable set of distinct prefixes with longest-prefix lookup.
///
/// Prefixes are kept sorted by `(network, len)`; lookups walk a binary trie
/// of at most 32 levels.
#[derive(Clone, Debug)]
pub struct PrefixTable {
    prefixes: Vec<Prefix>,
    nodes: Vec<Node>,
}

impl PrefixTable {
    /// Builds a table; exact duplicates are collapsed.
    pub fn new(prefixes: impl IntoIterator<Item = Prefix>) -> Self {
        let mut prefixes: Vec<Prefix> = prefixes.into_iter().collect();
        prefixes.sort_unstable();
        prefixes.dedup();
        let mut nodes = vec![Node::EMPTY];
        for (i, p) in prefixes.iter().enumerate() {
            let mut cur = 0usize;
            for depth in 0..p.len {
                let b = Prefix::bit(p.network, depth);
                let next = nodes[cur].child[b];
                cur = if next == NONE {
                    nodes.push(Node::EMPTY);
                    let id = (nodes.len() - 1) as u32;
                    nodes[cur].child[b] = id;
                    id as usize
                } else {
                    next as usize
                };
            }
            nodes[cur].prefix = i as u32;
        }
        Self { prefixes, nodes }
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    /// Prefixes in `(network, len)` order.
    pub fn prefixes(&self) -> &[Prefix] {
        &self.prefixes
    }

    pub fn contains(&self, p: &Prefix) -> bool {
        self.prefixes.binary_search(p).is_ok()
    }

    /// Index (into [`PrefixTable::prefixes`]) of the longest prefix containing `addr`.
    pub fn lookup_index(&self, addr: u32) -> Option<usize> {
        let mut best = self.nodes[0].prefix;
        let mut cur = 0usize;
        for depth in 0..32 {
            let next = self.nodes[cur].child[Prefix::bit(addr, depth)];
            if next == NONE {
                break;
            }
            cur = next as usize;
            if self.nodes[cur].prefix != NONE {
                best = self.nodes[cur].prefix;
            }
        }
        (best != NONE).then_some(best as usize)
    }

    /// Longest prefix containing `addr`.
    pub fn lookup(&self, addr: Ipv4Addr) -> Option<Prefix> {
        self.lookup_index(u32::from(addr)).map(|i| self.prefixes[i])
    }

    /// True if some other prefix in the table strictly covers `p`.
    fn has_strict_cover(&self, p: &Prefix) -> bool {
        let mut cur = 0usize;
        for depth in 0..p.len {
            if self.nodes[cur].prefix != NONE {
                return true;
            }
            let next = self.nodes[cur].child[Prefix::bit(p.network, depth)];
            if next == NONE {
                return false;
            }
            cur = next as usize;
        }
        false
    }

    /// Drops every prefix covered by a shorter prefix of the same table.
    pub fn filter_more_specifics(&self) -> PrefixTable {
        let keep = par::map(&self.prefixes, |p| !self.has_strict_cover(p));
        PrefixTable::new(
            self.prefixes
                .iter()
                .zip(keep)
                .filter_map(|(p, k)| k.then_some(*p)),
        )
    }
}

/// Routing-table parse outcome.
#[derive(Clone, Debug)]
pub struct ParsedTable {
    pub table: PrefixTable,
    /// Entries whose host bits were cleared.
    pub masked: usize,
    /// Lines that did not parse.
    pub rejected: usize,
    /// Entries dropped as exact duplicates after masking.
    pub duplicates: usize,
    /// Total data lines seen.
    pub lines: usize,
}

/// Parses `a.b.c.d/len` lines; `#` comments and blank lines are skipped.
/// Bad lines are counted rather than fatal, but an empty result is an error.
pub fn parse_routing_table<R: BufRead>(input: R) -> Result<ParsedTable> {
    let mut prefixes = Vec::new();
    let (mut masked, mut rejected, mut lines) = (0, 0, 0);
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        lines += 1;
        match parse_cidr(line) {
            Ok((p, m)) => {
                masked += usize::from(m);
                prefixes.push(p);
            }
            Err(_) => rejected += 1,
        }
    }
    let raw = prefixes.len();
    let table = PrefixTable::new(prefixes);
    if table.is_empty() {
        return Err(Error::EmptyTable { rejected });
    }
    Ok(ParsedTable {
        duplicates: raw - table.len(),
        table,
        masked,
        rejected,
        lines,
    })
}

/// A packet trace projected onto prefixes.
#[derive(Clone, Debug)]
pub struct MappedTrace {
    /// One reference per matched packet; tokens are prefixes in CIDR form.
    pub refs: ReferenceString,
    pub unmatched: usize,
}

/// Assigns dense ids to table indices in first-seen order.
struct PrefixInterner<'a> {
    table: &'a PrefixTable,
    ids: Vec<u32>,
    symbols: Vec<String>,
    refs: Vec<ObjectId>,
    unmatched: usize,
}

impl<'a> PrefixInterner<'a> {
    fn new(table: &'a PrefixTable) -> Self {
        Self {
            table,
            ids: vec![NONE; table.len()],
            symbols: Vec::new(),
            refs: Vec::new(),
            unmatched: 0,
        }
    }

    fn push(&mut self, idx: Option<usize>) {
        let Some(i) = idx else {
            self.unmatched += 1;
            return;
        };
        if self.ids[i] == NONE {
            self.ids[i] = self.symbols.len() as u32;
            self.symbols.push(self.table.prefixes[i].to_string());
        }
        self.refs.push(ObjectId(self.ids[i]));
    }

    fn finish(self) -> Result<MappedTrace> {
        if self.refs.is_empty() {
            return Err(Error::NoMatches {
                unmatched: self.unmatched,
            });
        }
        Ok(MappedTrace {
            refs: ReferenceString::from_parts_unchecked(self.refs, self.symbols),
            unmatched: self.unmatched,
        })
    }
}

const MAP_CHUNK: usize = 1 << 15;

/// Maps every packet to its longest matching prefix. Lookups run in
/// parallel chunks; interning is sequential, so ids follow input order.
pub fn map_trace(pkts: &PacketTrace, table: &PrefixTable) -> Result<MappedTrace> {
    if table.is_empty() {
        return Err(invalid("empty prefix table"));
    }
    let hits = par::flat_map_chunks(&pkts.records, MAP_CHUNK, |chunk| {
        chunk
            .iter()
            .map(|r| table.lookup_index(u32::from(r.dst)))
            .collect()
    });
    let mut interner = PrefixInterner::new(table);
    for h in hits {
        interner.push(h);
    }
    interner.finish()
}

/// Streaming variant of [`map_trace`] for record iterators (e.g. a
/// [`crate::refstring::PacketTraceReader`]).
pub fn map_packets<I>(records: I, table: &PrefixTable) -> Result<MappedTrace>
where
    I: IntoIterator<Item = Result<PacketRecord>>,
{
    if table.is_empty() {
        return Err(invalid("empty prefix table"));
    }
    let mut interner = PrefixInterner::new(table);
    for r in records {
        interner.push(table.lookup_index(u32::from(r?.dst)));
    }
    interner.finish()
}

/// Fraction of the (filtered) table observed in a trace.
pub fn coverage_ratio(
    distinct_prefixes_in_trace: usize,
    filtered_table_size: usize,
) -> Result<f64> {
    if filtered_table_size == 0 {
        return Err(invalid("coverage ratio with an empty table"));
    }
    Ok(distinct_prefixes_in_trace as f64 / filtered_table_size as f64)
}

/// Rounds to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
