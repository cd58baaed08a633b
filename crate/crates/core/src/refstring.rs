//! Reference strings and trace ingestion.
//!
//! Two text formats are understood:
//!
//! * object traces: one token per line, any non-empty run of non-whitespace
//!   characters. Tokens are interned to dense [`ObjectId`]s in first-seen
//!   order.
//! * packet traces: `epoch_seconds,a.b.c.d` or bare `a.b.c.d` per line.
//!
//! In both formats lines starting with `#` are comments, blank lines are
//! ignored and CRLF line endings are accepted. Both readers stream their
//! input; the only state they keep beyond the current line is the symbol
//! table (object traces) or the emitted records.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;

use crate::error::{Error, Result};

/// Dense identifier of a destination object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct ObjectId(pub u32);

impl ObjectId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Assigns dense ids to tokens in first-seen order.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    ids: HashMap<String, ObjectId>,
    symbols: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> Result<ObjectId> {
        if let Some(&id) = self.ids.get(token) {
            return Ok(id);
        }
        let next = u32::try_from(self.symbols.len())
            .ok()
            .filter(|&n| n < u32::MAX)
            .ok_or_else(|| Error::Domain("more than 2^32-1 distinct objects".into()))?;
        let id = ObjectId(next);
        self.ids.insert(token.to_owned(), id);
        self.symbols.push(token.to_owned());
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn into_symbols(self) -> Vec<String> {
        self.symbols
    }
}

/// An ordered sequence of references to `n_objects()` distinct objects.
///
/// Every id in `refs` is below `n_objects()` and every object is referenced
/// at least once. The value is immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceString {
    refs: Vec<ObjectId>,
    symbols: Vec<String>,
}

impl ReferenceString {
    /// Builds a reference string from raw ids and their symbol table.
    pub fn from_parts(refs: Vec<ObjectId>, symbols: Vec<String>) -> Result<Self> {
        let mut seen = vec![false; symbols.len()];
        for (i, id) in refs.iter().enumerate() {
            match seen.get_mut(id.index()) {
                Some(s) => *s = true,
                None => {
                    return Err(Error::Domain(format!(
                        "reference {i} names object {id} but only {} symbols exist",
                        symbols.len()
                    )))
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Domain(format!(
                "symbol {missing} ({:?}) is never referenced",
                symbols[missing]
            )));
        }
        Ok(Self { refs, symbols })
    }

    /// Interns `tokens` in order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut interner = Interner::new();
        let refs = tokens
            .into_iter()
            .map(|t| interner.intern(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            refs,
            symbols: interner.into_symbols(),
        })
    }

    pub(crate) fn from_parts_unchecked(refs: Vec<ObjectId>, symbols: Vec<String>) -> Self {
        debug_assert!(refs.iter().all(|id| id.index() < symbols.len()));
        Self { refs, symbols }
    }

    pub fn refs(&self) -> &[ObjectId] {
        &self.refs
    }

    pub fn n_refs(&self) -> usize {
        self.refs.len()
    }

    pub fn n_objects(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, id: ObjectId) -> &str {
        &self.symbols[id.index()]
    }

    /// Writes the string in object-trace format, one token per line.
    pub fn write_object_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for id in &self.refs {
            w.write_all(self.symbols[id.index()].as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Line source shared by both readers: strips line endings, skips blank
/// lines and comments, tracks 1-based line numbers.
struct Lines<R> {
    inner: R,
    buf: Vec<u8>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::with_capacity(64),
            line_no: 0,
        }
    }

    /// Returns the next data line, or `None` at end of input.
    fn next_data(&mut self) -> Option<Result<(usize, &str)>> {
        loop {
            self.buf.clear();
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let mut end = self.buf.len();
            while end > 0 && matches!(self.buf[end - 1], b'\n' | b'\r') {
                end -= 1;
            }
            if end == 0 || self.buf[0] == b'#' {
                continue;
            }
            let line_no = self.line_no;
            return Some(match std::str::from_utf8(&self.buf[..end]) {
                Ok(s) => Ok((line_no, s)),
                Err(_) => Err(Error::Parse {
                    line: line_no,
                    msg: "invalid UTF-8".into(),
                }),
            });
        }
    }
}

/// Streaming object-trace reader yielding interned ids.
///
/// After the iterator is exhausted, [`ObjectTraceReader::into_symbols`]
/// returns the symbol table.
pub struct ObjectTraceReader<R> {
    lines: Lines<R>,
    interner: Interner,
    emitted: usize,
    done: bool,
}

impl<R: BufRead> ObjectTraceReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            lines: Lines::new(inner),
            interner: Interner::new(),
            emitted: 0,
            done: false,
        }
    }

    pub fn refs_read(&self) -> usize {
        self.emitted
    }

    pub fn into_symbols(self) -> Vec<String> {
        self.interner.into_symbols()
    }
}

impl<R: BufRead> Iterator for ObjectTraceReader<R> {
    type Item = Result<ObjectId>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let (line, token) = match self.lines.next_data() {
            Some(Ok(v)) => v,
            Some(Err(e)) => {
                self.done = true;
                return Some(Err(e));
            }
            None => {
                self.done = true;
                return (self.emitted == 0).then_some(Err(Error::EmptyTrace));
            }
        };
        if token.chars().any(char::is_whitespace) {
            self.done = true;
            return Some(Err(Error::Parse {
                line,
                msg: format!("token {token:?} contains whitespace"),
            }));
        }
        let id = self.interner.intern(token);
        if id.is_ok() {
            self.emitted += 1;
        } else {
            self.done = true;
        }
        Some(id)
    }
}

/// Reads a whole object trace.
pub fn read_object_trace<R: BufRead>(input: R) -> Result<ReferenceString> {
    let mut reader = ObjectTraceReader::new(input);
    let refs = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok(ReferenceString::from_parts_unchecked(
        refs,
        reader.into_symbols(),
    ))
}

/// One observed packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the epoch, when the trace carries timestamps.
    pub ts: Option<f64>,
    pub dst: Ipv4Addr,
}

/// Packets in input order. Timestamps are not required to be monotone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PacketTrace {
    pub records: Vec<PacketRecord>,
    /// Data lines skipped because they did not parse.
    pub malformed: usize,
}

impl PacketTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_timestamps(&self) -> bool {
        self.records.first().is_some_and(|r| r.ts.is_some())
    }

    /// Average packets per second, `N / (last_ts - first_ts)`, using the
    /// first and last records in input order.
    pub fn avg_rate(&self) -> Option<f64> {
        let first = self.records.first()?.ts?;
        let last = self.records.last()?.ts?;
        let span = last - first;
        (span > 0.0).then(|| self.records.len() as f64 / span)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PacketFormat {
    Timestamped,
    Bare,
}

/// Streaming packet-trace reader. Malformed lines are skipped and counted.
pub struct PacketTraceReader<R> {
    lines: Lines<R>,
    format: Option<PacketFormat>,
    data_lines: usize,
    good: usize,
    malformed: usize,
    done: bool,
}

impl<R: BufRead> PacketTraceReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            lines: Lines::new(inner),
            format: None,
            data_lines: 0,
            good: 0,
            malformed: 0,
            done: false,
        }
    }

    pub fn malformed(&self) -> usize {
        self.malformed
    }

    pub fn records_read(&self) -> usize {
        self.good
    }

    fn parse(format: PacketFormat, line: &str) -> Option<PacketRecord> {
        match format {
            PacketFormat::Bare => Some(PacketRecord {
                ts: None,
                dst: line.trim().parse().ok()?,
            }),
            PacketFormat::Timestamped => {
                let (ts, dst) = line.split_once(',')?;
                let ts: f64 = ts.trim().parse().ok()?;
                if !ts.is_finite() {
                    return None;
                }
                Some(PacketRecord {
                    ts: Some(ts),
                    dst: dst.trim().parse().ok()?,
                })
            }
        }
    }
}

impl<R: BufRead> Iterator for PacketTraceReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let (line_no, line) = match self.lines.next_data() {
                Some(Ok(v)) => v,
                Some(Err(Error::Parse { .. })) => {
                    // Undecodable bytes count as noise like any other bad line.
                    self.data_lines += 1;
                    self.malformed += 1;
                    continue;
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    if self.data_lines == 0 {
                        return Some(Err(Error::EmptyTrace));
                    }
                    if self.good == 0 {
                        return Some(Err(Error::AllMalformed {
                            lines: self.data_lines,
                        }));
                    }
                    return None;
                }
            };
            self.data_lines += 1;
            let fmt = if line.contains(',') {
                PacketFormat::Timestamped
            } else {
                PacketFormat::Bare
            };
            match self.format {
                None => self.format = Some(fmt),
                Some(f) if f != fmt => {
                    self.done = true;
                    return Some(Err(Error::InconsistentFormat { line: line_no }));
                }
                Some(_) => {}
            }
            match Self::parse(fmt, line) {
                Some(rec) => {
                    self.good += 1;
                    return Some(Ok(rec));
                }
                None => self.malformed += 1,
            }
        }
        None
    }
}

/// Reads a whole packet trace.
pub fn read_packet_trace<R: BufRead>(input: R) -> Result<PacketTrace> {
    let mut reader = PacketTraceReader::new(input);
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok(PacketTrace {
        records,
        malformed: reader.malformed(),
    })
}

/// Guesses whether `first_data_line` belongs to a packet trace.
pub fn looks_like_packet_line(first_data_line: &str) -> bool {
    let line = first_data_line.trim();
    let addr = match line.split_once(',') {
        Some((ts, a)) => {
            if ts.trim().parse::<f64>().is_err() {
                return false;
            }
            a
        }
        None => line,
    };
    addr.trim().parse::<Ipv4Addr>().is_ok()
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn ids(rs: &ReferenceString) -> Vec<u32> {
        rs.refs().iter().map(|r| r.0).collect()
    }

    #[test]
    fn interns_in_first_seen_order() {
        let rs = read_object_trace("a\nb\na\n".as_bytes()).unwrap();
        assert_eq!(ids(&rs), [0, 1, 0]);
        assert_eq!(rs.n_refs(), 3);
        assert_eq!(rs.n_objects(), 2);
    }

    #[test]
    fn skips_comments() {
        let rs = read_object_trace("x\n#c\nx\n".as_bytes()).unwrap();
        assert_eq!(ids(&rs), [0, 0]);
        assert_eq!(rs.n_objects(), 1);
    }

    #[test]
    fn accepts_crlf_and_blank_lines() {
        let rs = read_object_trace("a\r\n\r\nb\r\n".as_bytes()).unwrap();
        assert_eq!(rs.symbols(), ["a", "b"]);
    }

    #[test]
    fn empty_object_trace_is_an_error() {
        let err = read_object_trace("# only comments\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "empty trace");
        assert!(matches!(
            read_object_trace("".as_bytes()),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn whitespace_inside_token_reports_line() {
        let err = read_object_trace("a\nb c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn distinct_count_matches_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tokens: Vec<String> = (0..10_000)
            .map(|_| format!("t{}", rng.random_range(0..3_000u32)))
            .collect();
        let text = tokens.join("\n");
        let rs = read_object_trace(text.as_bytes()).unwrap();
        let oracle: HashSet<&String> = tokens.iter().collect();
        assert_eq!(rs.n_refs(), 10_000);
        assert_eq!(rs.n_objects(), oracle.len());
    }

    #[test]
    fn from_parts_rejects_unreferenced_symbols() {
        let err = ReferenceString::from_parts(vec![ObjectId(0)], vec!["a".into(), "b".into()]);
        assert!(err.is_err());
        let err = ReferenceString::from_parts(vec![ObjectId(2)], vec!["a".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn packet_trace_with_timestamps() {
        let t = read_packet_trace("1243296000,10.1.2.3\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.records[0].dst, Ipv4Addr::new(10, 1, 2, 3));
        assert_eq!(t.records[0].ts, Some(1243296000.0));
    }

    #[test]
    fn packet_trace_without_timestamps() {
        let t = read_packet_trace("10.1.2.3\n10.1.2.4\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.records.iter().all(|r| r.ts.is_none()));
        assert!(!t.has_timestamps());
    }

    #[test]
    fn malformed_packet_lines_are_counted() {
        let mut text = String::new();
        for i in 0..100 {
            if i == 37 {
                text.push_str("10.1.300.4\n");
            } else {
                text.push_str(&format!("10.0.0.{}\n", i % 250));
            }
        }
        let t = read_packet_trace(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 99);
        assert_eq!(t.malformed, 1);
    }

    #[test]
    fn all_malformed_is_fatal() {
        let err = read_packet_trace("nope\n1.2.3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::AllMalformed { lines: 2 }));
    }

    #[test]
    fn mixed_formats_are_rejected() {
        let err = read_packet_trace("1,10.0.0.1\n10.0.0.2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("inconsistent format"));
    }

    #[test]
    fn avg_rate_over_one_second() {
        let t = read_packet_trace("100,10.0.0.1\n101,10.0.0.2\n".as_bytes()).unwrap();
        assert_eq!(t.avg_rate(), Some(2.0));
    }

    #[test]
    fn sniffs_packet_lines() {
        assert!(looks_like_packet_line("10.0.0.1"));
        assert!(looks_like_packet_line("12.5,10.0.0.1"));
        assert!(!looks_like_packet_line("10.0.0.0/8"));
        assert!(!looks_like_packet_line("foo"));
    }

    proptest! {
        #[test]
        fn object_trace_round_trips(tokens in prop::collection::vec("[a-z0-9./]{1,6}", 1..200)) {
            let rs = ReferenceString::from_tokens(&tokens).unwrap();
            let mut buf = Vec::new();
            rs.write_object_trace(&mut buf).unwrap();
            let back = read_object_trace(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rs);
        }

        #[test]
        fn first_occurrence_ids_are_order_stable(
            tokens in prop::collection::vec(0u8..20, 1..100),
            seed in any::<u64>(),
        ) {
            // Shuffle everything after each token's first occurrence.
            let mut seen = HashSet::new();
            let firsts: Vec<usize> = tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| seen.insert(**t))
                .map(|(i, _)| i)
                .collect();
            let last_first = *firsts.last().unwrap();
            let mut permuted = tokens.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::seq::SliceRandom;
            permuted[last_first + 1..].shuffle(&mut rng);

            let a = ReferenceString::from_tokens(tokens.iter().map(|t| t.to_string())).unwrap();
            let b = ReferenceString::from_tokens(permuted.iter().map(|t| t.to_string())).unwrap();
            for &i in &firsts {
                prop_assert_eq!(a.refs()[i], b.refs()[i]);
            }
            prop_assert_eq!(a.symbols(), b.symbols());
        }
    }
}
