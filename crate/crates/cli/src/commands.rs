use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mapcache::curve::{log_sizes, log_space, CurveSource};
use mapcache::lru::{
    miss_rate_curve, simulate_lru_fixed_with_warmup, stack_distance_histogram_with_warmup,
    write_stats_csv,
};
use mapcache::model::{sensitivity_curve, ExponentSweep, GZipfSpec};
use mapcache::pipeline::{compare_curves, scaling_experiment, write_scaling_csv, ScalingConfig};
use mapcache::powerfit::{fit_piecewise, popularity_exponents};
use mapcache::prefixdb::coverage_ratio;
use mapcache::stats::{
    inter_reference_histogram, length_frequency_correlation, rank_frequency, working_set_curve,
};
use mapcache::synth::{generate_irm, irm_shuffle, rank_probabilities, RankLaw};
use mapcache::{GZipfParams, MissRateCurve, MissRateModel, ModelParams, ThreeRegionParams};
use serde::Serialize;

use crate::input::{load, LoadOptions, Loaded};
use crate::{
    usage, Command, CompareArgs, CurveArgs, FitArgs, Grid, LawArgs, ModelArgs, ScalingArgs,
    ShuffleArgs, SimulateArgs, SizeGrid, StatsArgs, SynthArgs, TraceArgs,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Stats(a) => stats(a),
        Command::Fit(a) => fit(a),
        Command::Synth(a) => synth(a),
        Command::Shuffle(a) => shuffle(a),
        Command::Simulate(a) => simulate(a),
        Command::Curve(a) => curve(a),
        Command::Model(a) => model(a),
        Command::Compare(a) => compare(a),
        Command::Scaling(a) => scaling(a),
    }
}

/// Invalid user-supplied parameters are usage errors, not data errors.
fn param_err(e: mapcache::Error) -> anyhow::Error {
    match e {
        mapcache::Error::InvalidParameter(msg) => usage(msg),
        other => other.into(),
    }
}

fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(usage(format!("input file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn load_trace(t: &TraceArgs) -> Result<Loaded> {
    require_inputs(std::iter::once(t.trace.as_path()).chain(t.rib.as_deref()))?;
    load(&LoadOptions {
        trace: &t.trace,
        rib: t.rib.as_deref(),
        no_filter: t.no_filter,
        format: t.format,
        progress: t.progress,
    })
}

/// Runs `f` against the file at `path`, or stdout when no path is given.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()
                .with_context(|| format!("writing {}", p.display()))?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn integer_grid(g: &Grid) -> Result<Vec<u64>> {
    if g.lo.fract() != 0.0 || g.hi.fract() != 0.0 {
        return Err(usage(format!(
            "cache sizes must be integers, got {}:{}",
            g.lo, g.hi
        )));
    }
    log_sizes(g.lo as u64, g.hi as u64, g.steps).map_err(param_err)
}

fn integer_sizes(grid: &SizeGrid) -> Result<Vec<u64>> {
    match (&grid.sizes, &grid.log_sizes) {
        (Some(list), _) => {
            if let Some(bad) = list.iter().find(|s| !(**s >= 1.0 && s.fract() == 0.0)) {
                return Err(usage(format!(
                    "cache size {bad} must be a positive integer"
                )));
            }
            let mut sizes: Vec<u64> = list.iter().map(|&s| s as u64).collect();
            sizes.sort_unstable();
            sizes.dedup();
            Ok(sizes)
        }
        (None, Some(g)) => integer_grid(g),
        (None, None) => Err(usage("one of --sizes or --log-sizes is required")),
    }
}

#[derive(Serialize)]
struct Summary {
    trace_kind: &'static str,
    n_refs: usize,
    d_objects: usize,
    avg_refs_per_sec: Option<f64>,
    malformed_lines: usize,
    unmatched_packets: usize,
    table_prefixes: Option<usize>,
    rho: Option<f64>,
    length_frequency_spearman: Option<f64>,
}

fn stats(a: StatsArgs) -> Result<()> {
    let loaded = load_trace(&a.input)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let rs = &loaded.refs;
    let n = rs.n_refs();
    let windows: Vec<usize> = match a.windows {
        Some(g) => integer_grid(&g)?.into_iter().map(|w| w as usize).collect(),
        None => log_sizes(1, (n as u64 / 10).max(1), 40)?
            .into_iter()
            .map(|w| w as usize)
            .collect(),
    };
    if let Some(w) = windows.iter().find(|&&w| w > n) {
        return Err(usage(format!(
            "working-set window {w} exceeds the trace length {n}"
        )));
    }

    let rft = rank_frequency(rs)?;
    let ir = inter_reference_histogram(rs);
    let ws = working_set_curve(rs, &windows)?;
    let (rho, spearman) = match &loaded.table {
        Some(table) => (
            Some(coverage_ratio(rs.n_objects(), table.len())?),
            // Correlation needs at least two objects.
            (rft.len() >= 2)
                .then(|| length_frequency_correlation(&rft, rs.symbols(), table))
                .transpose()?,
        ),
        None => (None, None),
    };
    let summary = Summary {
        trace_kind: loaded.kind.name(),
        n_refs: n,
        d_objects: rs.n_objects(),
        avg_refs_per_sec: loaded.avg_rate,
        malformed_lines: loaded.malformed,
        unmatched_packets: loaded.unmatched,
        table_prefixes: loaded.table.as_ref().map(|t| t.len()),
        rho,
        length_frequency_spearman: spearman,
    };

    let path = |name: &str| -> PathBuf { a.out_dir.join(name) };
    emit(Some(&path("rank_freq.csv")), |w| Ok(rft.write_csv(w)?))?;
    emit(Some(&path("interref.csv")), |w| Ok(ir.write_csv(w)?))?;
    emit(Some(&path("workingset.csv")), |w| Ok(ws.write_csv(w)?))?;
    emit(Some(&path("summary.json")), |w| write_json(w, &summary))
}

fn fit(a: FitArgs) -> Result<()> {
    if a.model_out.is_some() && a.segments == 1 {
        return Err(usage("--model-out needs 2 or 3 segments"));
    }
    let loaded = load_trace(&a.input)?;
    let rft = rank_frequency(&loaded.refs)?;
    let (lo, hi) = a.rank_range.map_or((1.0, f64::INFINITY), |s| (s.lo, s.hi));
    let points: Vec<(f64, f64)> = rft
        .points(a.min_count)
        .into_iter()
        .filter(|&(k, _)| k >= lo && k <= hi)
        .collect();
    let fit = fit_piecewise(&points, a.segments as usize, a.breaks.as_deref())?;
    let exps = popularity_exponents(&fit, rft.total_refs as f64)?;
    emit(a.out.as_deref(), |w| {
        w.write_all(fit.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    eprintln!(
        "slopes {:?}; alphas {:?}; crossover freqs {:?}",
        fit.slopes(),
        exps.alphas,
        exps.crossover_freqs
    );
    let Some(model_out) = a.model_out else {
        return Ok(());
    };
    let n_refs = rft.total_refs;
    let params = match exps.alphas[..] {
        [q, r] => {
            // Pick mu/lambda so that (mu/(lambda-mu))^(1/(q-r)) lands on the
            // fitted crossover frequency.
            let x = exps.crossover_freqs[0].powf(q - r);
            ModelParams::Gzipf(GZipfParams::new(q, r, x / (1.0 + x), 1.0, n_refs)?)
        }
        [a1, a2, a3] => {
            let nu = &exps.crossover_freqs;
            ModelParams::ThreeRegion(ThreeRegionParams::new(
                [a1, a2, a3],
                [nu[0], nu[1]],
                n_refs,
            )?)
        }
        _ => unreachable!("segment count checked above"),
    };
    emit(Some(&model_out), |w| Ok(params.write_json(w)?))
}

fn build_law(l: &LawArgs) -> Result<RankLaw> {
    if l.uniform {
        return RankLaw::uniform(l.objects).map_err(param_err);
    }
    match (l.q, l.r, l.crossover_rank) {
        (Some(q), Some(r), Some(kc)) => {
            RankLaw::from_gzipf_exponents(l.objects, q, r, kc).map_err(param_err)
        }
        _ => Err(usage(
            "--q, --r and --crossover-rank are required unless --uniform is given",
        )),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let law = build_law(&a.law)?;
    if a.refs == 0 {
        return Err(usage("--refs must be positive"));
    }
    let rs = generate_irm(&rank_probabilities(&law), a.refs, a.seed)?;
    emit(a.out.as_deref(), |w| Ok(rs.write_object_trace(w)?))
}

fn shuffle(a: ShuffleArgs) -> Result<()> {
    let loaded = load_trace(&a.input)?;
    let rs = irm_shuffle(&loaded.refs, a.seed)?;
    emit(a.out.as_deref(), |w| Ok(rs.write_object_trace(w)?))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.sizes.contains(&0) {
        return Err(usage("cache sizes must be positive"));
    }
    let loaded = load_trace(&a.input)?;
    let rs = &loaded.refs;
    let stats = mapcache::par::map(&a.sizes, |&s| {
        simulate_lru_fixed_with_warmup(rs, s as usize, a.warmup)
    })
    .into_iter()
    .collect::<mapcache::Result<Vec<_>>>()?;
    emit(a.out.as_deref(), |w| Ok(write_stats_csv(&stats, w)?))
}

fn curve(a: CurveArgs) -> Result<()> {
    let sizes = integer_sizes(&a.grid)?;
    let loaded = load_trace(&a.input)?;
    if a.warmup >= loaded.refs.n_refs() {
        return Err(usage(format!(
            "--warmup {} leaves no references out of {}",
            a.warmup,
            loaded.refs.n_refs()
        )));
    }
    let h = stack_distance_histogram_with_warmup(&loaded.refs, a.warmup);
    let curve = miss_rate_curve(&h, &sizes)?;
    emit(a.out.as_deref(), |w| Ok(curve.write_csv(w)?))
}

fn model_params(a: &ModelArgs) -> Result<ModelParams> {
    let overrides = [a.q, a.r, a.mu, a.lambda].iter().any(Option::is_some) || a.n_refs.is_some();
    let base = match &a.params {
        Some(p) => {
            require_inputs([p.as_path()])?;
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(
                ModelParams::read_json(io::BufReader::new(f))
                    .with_context(|| format!("reading {}", p.display()))?,
            )
        }
        None => None,
    };
    let spec = match base {
        Some(ModelParams::ThreeRegion(t)) => {
            if overrides {
                return Err(usage(
                    "--q/--r/--mu/--lambda/--n-refs only apply to gzipf parameter files",
                ));
            }
            return Ok(ModelParams::ThreeRegion(t));
        }
        Some(ModelParams::Gzipf(g)) => {
            let s = g.spec();
            GZipfSpec {
                q: a.q.unwrap_or(s.q),
                r: a.r.unwrap_or(s.r),
                mu: a.mu.unwrap_or(s.mu),
                lambda: a.lambda.unwrap_or(s.lambda),
                n_refs: a.n_refs.unwrap_or(s.n_refs),
            }
        }
        None => match (a.q, a.r, a.mu, a.lambda, a.n_refs) {
            (Some(q), Some(r), Some(mu), Some(lambda), Some(n_refs)) => GZipfSpec {
                q,
                r,
                mu,
                lambda,
                n_refs,
            },
            _ => {
                return Err(usage(
                    "give --params or all of --q --r --mu --lambda --n-refs",
                ))
            }
        },
    };
    Ok(ModelParams::Gzipf(
        GZipfParams::new(spec.q, spec.r, spec.mu, spec.lambda, spec.n_refs).map_err(param_err)?,
    ))
}

fn model(a: ModelArgs) -> Result<()> {
    if a.grid.sensitivity.is_none() && (a.exponent_grid.is_some() || a.pin_r) {
        return Err(usage(
            "--exponent-grid and --pin-r only apply with --sensitivity",
        ));
    }
    let params = model_params(&a)?;
    if let Some(path) = &a.save_params {
        emit(Some(path), |w| Ok(params.write_json(w)?))?;
    }
    if let Some(m_fixed) = a.grid.sensitivity {
        let ModelParams::Gzipf(base) = &params else {
            return Err(usage("--sensitivity needs gzipf parameters"));
        };
        let (sweep, q_min) = if a.pin_r {
            (ExponentSweep::PinR, base.r())
        } else {
            let offset = base.q() - base.r();
            (ExponentSweep::CoVary { offset }, 1.0 + offset)
        };
        let grid = match a.exponent_grid {
            Some(g) => log_space(g.lo, g.hi, g.steps),
            None if q_min < 1.9 => log_space(q_min + 0.02, 1.95, 16),
            None => {
                return Err(usage(
                    "no room for a default exponent grid; pass --exponent-grid",
                ))
            }
        };
        let rows = sensitivity_curve(m_fixed, &grid, base, sweep).map_err(param_err)?;
        return emit(a.out.as_deref(), |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["exponent", "size"])?;
            for (e, s) in rows {
                out.write_record([e.to_string(), s.to_string()])?;
            }
            out.flush()?;
            Ok(())
        });
    }
    let sizes: Vec<f64> = match (&a.grid.sizes, &a.grid.log_sizes) {
        (Some(list), _) => list.clone(),
        (None, Some(g)) if g.lo.fract() == 0.0 && g.hi.fract() == 0.0 => {
            integer_grid(g)?.into_iter().map(|s| s as f64).collect()
        }
        (None, Some(g)) => log_space(g.lo, g.hi, g.steps),
        (None, None) => {
            return Err(usage(
                "one of --sizes, --log-sizes or --sensitivity is required",
            ))
        }
    };
    if let Some(bad) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(usage(format!("cache size {bad} must be positive")));
    }
    let (curve, clamped) = params.curve(&sizes)?;
    if clamped {
        eprintln!("note: model miss rate exceeded 1 at small sizes and was clamped");
    }
    emit(a.out.as_deref(), |w| Ok(curve.write_csv(w)?))
}

fn compare(a: CompareArgs) -> Result<()> {
    require_inputs([a.empirical.as_path(), a.model.as_path()])?;
    let emp = MissRateCurve::read_csv(
        File::open(&a.empirical).with_context(|| format!("opening {}", a.empirical.display()))?,
        CurveSource::Empirical,
    )
    .with_context(|| format!("reading {}", a.empirical.display()))?;
    let params = ModelParams::read_json(io::BufReader::new(File::open(&a.model)?))
        .with_context(|| format!("reading {}", a.model.display()))?;
    let cmp = compare_curves(&emp, &params, a.s_min)?;
    emit(a.out.as_deref(), |w| Ok(cmp.write_csv(w)?))?;
    let n = cmp.rows.iter().filter(|r| r.size >= a.s_min).count();
    eprintln!(
        "max |log10 ratio| = {} over {n} sizes >= {}",
        cmp.max_abs_log10_ratio, a.s_min
    );
    Ok(())
}

fn scaling(a: ScalingArgs) -> Result<()> {
    let law = build_law(&a.law)?;
    if a.refs == 0 {
        return Err(usage("--refs must be positive"));
    }
    if !(a.target_miss_rate > 0.0 && a.target_miss_rate < 1.0) {
        return Err(usage(format!(
            "--target-miss-rate {} must lie in (0, 1)",
            a.target_miss_rate
        )));
    }
    let cfg = ScalingConfig {
        law,
        n_refs: a.refs,
        seed: a.seed,
        scale_objects: a.scale_objects,
        target_miss_rate: a.target_miss_rate,
    };
    let rows = scaling_experiment(&cfg, &a.factors).map_err(param_err)?;
    emit(a.out.as_deref(), |w| Ok(write_scaling_csv(&rows, w)?))
}
