//! Trace and routing-table loading shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use mapcache::prefixdb::{map_trace, parse_routing_table};
use mapcache::refstring::{
    looks_like_packet_line, ObjectTraceReader, PacketTrace, PacketTraceReader,
};
use mapcache::{PrefixTable, ReferenceString};

use crate::usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    /// Decide from the first data line.
    Auto,
    /// One object token per line.
    Object,
    /// `ts,addr` or bare `addr` lines, mapped to prefixes through `--rib`.
    Packet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Object,
    Packet,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Object => "object",
            TraceKind::Packet => "packet",
        }
    }
}

pub struct LoadOptions<'a> {
    pub trace: &'a Path,
    pub rib: Option<&'a Path>,
    pub no_filter: bool,
    pub format: TraceFormat,
    pub progress: bool,
}

pub struct Loaded {
    pub refs: ReferenceString,
    pub kind: TraceKind,
    /// Packets per second, when the packet trace has timestamps.
    pub avg_rate: Option<f64>,
    pub malformed: usize,
    pub unmatched: usize,
    pub table: Option<PrefixTable>,
}

const PROGRESS_EVERY: usize = 1 << 20;

struct Progress {
    enabled: bool,
    count: usize,
}

impl Progress {
    fn tick(&mut self) {
        self.count += 1;
        if self.enabled && self.count.is_multiple_of(PROGRESS_EVERY) {
            eprintln!("progress: {} references read", self.count);
        }
    }

    fn finish(&self) {
        if self.enabled {
            eprintln!("progress: done, {} references read", self.count);
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn sniff(path: &Path) -> Result<TraceKind> {
    for line in open(path)?.lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        return Ok(if looks_like_packet_line(line) {
            TraceKind::Packet
        } else {
            TraceKind::Object
        });
    }
    Err(mapcache::Error::EmptyTrace).with_context(|| format!("reading {}", path.display()))
}

pub fn load_table(rib: &Path, no_filter: bool) -> Result<PrefixTable> {
    let parsed =
        parse_routing_table(open(rib)?).with_context(|| format!("parsing {}", rib.display()))?;
    Ok(if no_filter {
        parsed.table
    } else {
        parsed.table.filter_more_specifics()
    })
}

pub fn load(opts: &LoadOptions) -> Result<Loaded> {
    let kind = match opts.format {
        TraceFormat::Auto => sniff(opts.trace)?,
        TraceFormat::Object => TraceKind::Object,
        TraceFormat::Packet => TraceKind::Packet,
    };
    if kind == TraceKind::Packet && opts.rib.is_none() {
        return Err(usage(format!(
            "{} is a packet trace; --rib is required to map it to prefixes",
            opts.trace.display()
        )));
    }
    let table = opts
        .rib
        .map(|p| load_table(p, opts.no_filter))
        .transpose()?;
    let ctx = || format!("reading {}", opts.trace.display());
    let mut progress = Progress {
        enabled: opts.progress,
        count: 0,
    };

    let loaded = match kind {
        TraceKind::Object => {
            let mut reader = ObjectTraceReader::new(open(opts.trace)?);
            let refs = reader
                .by_ref()
                .inspect(|_| progress.tick())
                .collect::<mapcache::Result<Vec<_>>>()
                .with_context(ctx)?;
            let refs =
                ReferenceString::from_parts(refs, reader.into_symbols()).with_context(ctx)?;
            Loaded {
                refs,
                kind,
                avg_rate: None,
                malformed: 0,
                unmatched: 0,
                table,
            }
        }
        TraceKind::Packet => {
            let mut reader = PacketTraceReader::new(open(opts.trace)?);
            let records = reader
                .by_ref()
                .inspect(|_| progress.tick())
                .collect::<mapcache::Result<Vec<_>>>()
                .with_context(ctx)?;
            let pkts = PacketTrace {
                records,
                malformed: reader.malformed(),
            };
            let table = table.expect("rib checked above");
            let mapped = map_trace(&pkts, &table).with_context(ctx)?;
            Loaded {
                refs: mapped.refs,
                kind,
                avg_rate: pkts.avg_rate(),
                malformed: pkts.malformed,
                unmatched: mapped.unmatched,
                table: Some(table),
            }
        }
    };
    progress.finish();
    Ok(loaded)
}
