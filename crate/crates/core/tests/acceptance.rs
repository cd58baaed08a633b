//! Exit criteria for the whole pipeline. Each test prints one PASS/FAIL line
//! straight to stderr (bypassing libtest capture) before asserting.

use std::io::Write as _;
use std::net::Ipv4Addr;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mapcache::curve::{log_sizes, log_space};
use mapcache::lru::{miss_rate_curve, simulate_lru_fixed, stack_distance_histogram};
use mapcache::model::special::{generalized_harmonic, hurwitz_zeta, upper_incomplete_gamma};
use mapcache::model::{size_of_miss_rate, size_of_miss_rate_q2, GZipfParams, MissRateModel};
use mapcache::pipeline::{
    compare_curves, fit_three_region, scaling_experiment, ScalingConfig, ThreeRegionFitOptions,
};
use mapcache::powerfit::{fit_loglog_segment, fit_piecewise};
use mapcache::prefixdb::{coverage_ratio, round2, Prefix, PrefixTable};
use mapcache::stats::{inter_reference_histogram, rank_frequency, working_set_curve};
use mapcache::synth::{generate_irm, rank_probabilities, RankLaw};
use mapcache::ReferenceString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id:>2} [{verdict}] {name}: {detail}"
    );
}

fn check(id: u32, name: &str, ok: bool, detail: String) {
    report(id, name, ok, &detail);
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

// Shared synthetic workload: q = 1.7, r = 1.3, D = 10^4, k_c = 300, N = 10^6.
const Q: f64 = 1.7;
const R: f64 = 1.3;
const D: usize = 10_000;
const KC: usize = 300;
const N: usize = 1_000_000;
const SEED: u64 = 20_100_511;

struct Workload {
    law: RankLaw,
    probs: Vec<f64>,
    trace: ReferenceString,
    build_time: Duration,
}

fn workload() -> &'static Workload {
    static W: OnceLock<Workload> = OnceLock::new();
    W.get_or_init(|| {
        let t = Instant::now();
        let law = RankLaw::from_gzipf_exponents(D, Q, R, KC).unwrap();
        let probs = rank_probabilities(&law);
        let trace = generate_irm(&probs, N, SEED).unwrap();
        Workload {
            law,
            probs,
            trace,
            build_time: t.elapsed(),
        }
    })
}

/// Random strings used by the LRU oracle checks.
fn oracle_strings() -> Vec<ReferenceString> {
    (0..50u64)
        .map(|seed| {
            // Vary the skew with the seed, from uniform to Zipf-like.
            let beta = (seed % 5) as f64 * 0.3;
            let law = RankLaw::new(200, beta, beta, 200).unwrap();
            generate_irm(&rank_probabilities(&law), 10_000, 1_000 + seed).unwrap()
        })
        .collect()
}

#[test]
fn criterion_01_stack_distance_equals_simulation() {
    let t = Instant::now();
    let strings = oracle_strings();
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for rs in &strings {
        let h = stack_distance_histogram(rs);
        let sizes: Vec<u64> = (1..=200).collect();
        let curve = miss_rate_curve(&h, &sizes).unwrap();
        for (s, pt) in sizes.iter().zip(&curve.points) {
            let sim = simulate_lru_fixed(rs, *s as usize).unwrap();
            checked += 1;
            if sim.miss_rate() != pt.miss_rate || sim.misses != h.misses_at(*s as usize) {
                mismatches += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    check(
        1,
        "stack-distance curve equals fixed-size LRU",
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!("{mismatches} mismatches over {checked} (string, size) pairs in {elapsed:.2?} (limit 30s)"),
    );
}

#[test]
fn criterion_02_inclusion_and_cold_floor() {
    let mut strings = oracle_strings();
    strings.push(workload().trace.clone());
    let mut bad = Vec::new();
    for (i, rs) in strings.iter().enumerate() {
        let d = rs.n_objects() as u64;
        let h = stack_distance_histogram(rs);
        let sizes: Vec<u64> = (1..=d + 5).collect();
        let c = miss_rate_curve(&h, &sizes).unwrap();
        let floor = d as f64 / rs.n_refs() as f64;
        let monotone = c.is_non_increasing();
        let at_floor = c
            .points
            .iter()
            .filter(|p| p.size >= d as f64)
            .all(|p| p.miss_rate == floor);
        if !(monotone && at_floor) {
            bad.push(i);
        }
    }
    check(
        2,
        "miss rate non-increasing and equal to D/N for size >= D",
        bad.is_empty(),
        format!("{} strings checked, failing: {bad:?}", strings.len()),
    );
}

/// Head of the empirical curve: from the smallest cache up to one decade
/// below the crossover rank.
const HEAD_FIT_RANGE: (f64, f64) = (1.0, KC as f64 / 10.0);

#[test]
fn criterion_03_head_slope_of_empirical_curve() {
    let t = Instant::now();
    let w = workload();
    let h = stack_distance_histogram(&w.trace);
    let sizes = log_sizes(1, w.trace.n_objects() as u64, 60).unwrap();
    let curve = miss_rate_curve(&h, &sizes).unwrap();
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.size, p.miss_rate)).collect();
    let fit = fit_loglog_segment(&pts, HEAD_FIT_RANGE).unwrap();
    let target = 1.0 - 1.0 / (Q - 1.0);
    let elapsed = t.elapsed() + w.build_time;
    check(
        3,
        "head slope of empirical miss-rate curve",
        (fit.slope - target).abs() <= 0.05 && elapsed < Duration::from_secs(120),
        format!(
            "slope {:.4} over sizes {:?}, target {target:.4} ± 0.05, {elapsed:.2?} (limit 120s)",
            fit.slope, HEAD_FIT_RANGE
        ),
    );
}

#[test]
fn criterion_04_inter_reference_slope() {
    let w = workload();
    let ir = inter_reference_histogram(&w.trace);
    let binned = ir.log_binned(1.25).unwrap();
    let t_max = 1.0 / w.probs[w.law.crossover_rank - 1];
    let fit = fit_loglog_segment(&binned, (10.0, t_max)).unwrap();
    let target = -(3.0 - Q);
    check(
        4,
        "inter-reference distance slope",
        (fit.slope - target).abs() <= 0.1,
        format!(
            "slope {:.4} over t in [10, {t_max:.0}], target {target:.2} ± 0.1",
            fit.slope
        ),
    );
}

#[test]
fn criterion_05_cache_size_scaling() {
    let target = 0.05;
    let fixed = ScalingConfig {
        law: workload().law,
        n_refs: N,
        seed: SEED,
        scale_objects: false,
        target_miss_rate: target,
    };
    let rows = scaling_experiment(&fixed, &[1.0, 4.0]).unwrap();
    let change = (rows[1].size_at_target / rows[0].size_at_target - 1.0).abs();

    let uniform = ScalingConfig {
        law: RankLaw::uniform(D).unwrap(),
        n_refs: N,
        seed: SEED,
        scale_objects: true,
        target_miss_rate: target,
    };
    let urows = scaling_experiment(&uniform, &[1.0, 2.0]).unwrap();
    let ratio = urows[1].size_at_target / urows[0].size_at_target;
    check(
        5,
        "cache size independent of N, linear in D for uniform popularity",
        change < 0.10 && (ratio - 2.0).abs() <= 0.15 * 2.0,
        format!(
            "s(m=0.05): N=1e6 -> {:.1}, N=4e6 -> {:.1} (change {:.2}%, limit 10%); uniform D=1e4 -> {:.1}, D=2e4 -> {:.1} (ratio {ratio:.3}, want 2 ± 15%)",
            rows[0].size_at_target,
            rows[1].size_at_target,
            change * 100.0,
            urows[0].size_at_target,
            urows[1].size_at_target
        ),
    );
}

#[test]
fn criterion_06_three_region_model_vs_empirical() {
    let w = workload();
    let rft = rank_frequency(&w.trace).unwrap();
    let fitted = fit_three_region(&rft, &ThreeRegionFitOptions::default()).unwrap();
    let h = stack_distance_histogram(&w.trace);
    let sizes = log_sizes(1, w.trace.n_objects() as u64, 60).unwrap();
    let empirical = miss_rate_curve(&h, &sizes).unwrap();
    let cmp = compare_curves(&empirical, &fitted.params, 1000.0).unwrap();
    let worst = cmp
        .rows
        .iter()
        .filter(|r| r.size >= 1000.0)
        .max_by(|a, b| a.log10_ratio.abs().total_cmp(&b.log10_ratio.abs()))
        .unwrap();
    check(
        6,
        "three-regime model matches empirical curve for s >= 1000",
        cmp.max_abs_log10_ratio < 0.1,
        format!(
            "max |log10 ratio| {:.3} (limit 0.1) at s={} (empirical {:.5}, model {:.5}); alphas {:.3?}, crossovers {:?}",
            cmp.max_abs_log10_ratio,
            worst.size,
            worst.m_empirical,
            worst.m_model,
            fitted.exponents.alphas,
            fitted.exponents.crossover_freqs
        ),
    );
}

/// ∫_z^∞ x^(a-1) e^(-x) dx by composite Simpson on `[z, z + 80]`.
fn incomplete_gamma_oracle(a: f64, z: f64) -> f64 {
    let (lo, hi, n) = (z, z + 80.0, 2_000_000usize);
    let h = (hi - lo) / n as f64;
    let f = |x: f64| x.powf(a - 1.0) * (-x).exp();
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn criterion_07_special_functions() {
    let mut notes = Vec::new();
    let mut ok = true;

    let z2 = hurwitz_zeta(2.0, 1.0).unwrap();
    let want = std::f64::consts::PI.powi(2) / 6.0;
    let e = ((z2 - want) / want).abs();
    ok &= e <= 1e-9;
    notes.push(format!("zeta(2,1) rel err {e:.1e}"));

    for z in [0.1, 1.0, 10.0] {
        let g = upper_incomplete_gamma(1.0, z).unwrap();
        let e = (g - (-z).exp()).abs();
        ok &= e <= 1e-12;
        notes.push(format!("Gamma(1,{z}) err {e:.1e}"));
    }

    let h = generalized_harmonic(1_000_000, 1.2);
    let zd = hurwitz_zeta(1.2, 1.0).unwrap() - hurwitz_zeta(1.2, 1_000_001.0).unwrap();
    let e = ((h - zd) / zd).abs();
    ok &= e <= 1e-9;
    notes.push(format!("H(1e6,1.2) rel err {e:.1e}"));

    let g = upper_incomplete_gamma(1.3, 0.7).unwrap();
    let oracle = incomplete_gamma_oracle(1.3, 0.7);
    let e = (g - oracle).abs();
    ok &= e <= 1e-9;
    notes.push(format!("Gamma(1.3,0.7) err {e:.1e}"));

    check(7, "special functions", ok, notes.join(", "));
}

fn random_params(rng: &mut ChaCha8Rng) -> GZipfParams {
    loop {
        let q = rng.random_range(1.05..1.95);
        let r = rng.random_range(1.01..q - 0.02);
        let nu_k: f64 = 10f64.powf(rng.random_range(-6.0..-0.5));
        let mu = nu_k.powf(q - r);
        let n = 10f64.powf(rng.random_range(4.0..9.0)) as u64;
        if let Ok(p) = GZipfParams::new(q, r, mu, mu + 1.0, n) {
            return p;
        }
    }
}

#[test]
fn criterion_08_inverse_consistency_and_logarithmic_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let m: f64 = 10f64.powf(rng.random_range(-4.0..-0.01));
        match size_of_miss_rate(m, &p).and_then(|s| p.miss_rate(s)) {
            Ok(back) => worst = worst.max(((back - m) / m).abs()),
            Err(_) => failures += 1,
        }
    }
    let inverse_ok = worst <= 1e-6 && failures == 0;

    // q just below 2 against the logarithmic closed form.
    let eps = 1e-4;
    let nu_k = 1e-4f64;
    let mu = nu_k.powf(2.0 - eps - 1.2);
    let near = GZipfParams::new(2.0 - eps, 1.2, mu, mu + 1.0, 1_000_000).unwrap();
    let c = near.c_norm();
    let mut limit_worst = 0.0f64;
    let mut limit_note = String::new();
    for m in log_space(0.01, 0.5, 25) {
        let closed = size_of_miss_rate_q2(m, c);
        match size_of_miss_rate(m, &near) {
            Ok(s) => limit_worst = limit_worst.max(((s - closed) / closed).abs()),
            Err(e) => {
                limit_worst = f64::INFINITY;
                if limit_note.is_empty() {
                    limit_note = format!(" (m={m:.3}: {e}; closed form {closed:.4})");
                }
            }
        }
    }
    let limit_ok = limit_worst <= 0.01;
    check(
        8,
        "size/miss-rate inverse and q -> 2 limit",
        inverse_ok && limit_ok,
        format!(
            "round trip worst rel err {worst:.2e} over 1000 sets ({failures} errors, limit 1e-6); q=2-1e-4 vs logarithmic form worst rel diff {limit_worst:.3e} (limit 1%){limit_note}"
        ),
    );
}

#[test]
fn criterion_09_working_set_slope_identity() {
    let uniform = generate_irm(
        &rank_probabilities(&RankLaw::uniform(1000).unwrap()),
        100_000,
        9,
    )
    .unwrap();
    let traces = [&workload().trace, &uniform];
    let mut worst_margin = f64::INFINITY;
    let mut violations = 0;
    let mut checked = 0;
    for rs in traces {
        let n = rs.n_refs();
        let mut ts: Vec<usize> = log_space(1.0, (n / 100) as f64, 25)
            .into_iter()
            .map(|t| t.round() as usize)
            .collect();
        ts.dedup();
        let windows: Vec<usize> = ts.iter().flat_map(|&t| [t, t + 1]).collect();
        let c = working_set_curve(rs, &windows).unwrap();
        for pair in c.points.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            let gap = (a.miss_rate - (b.avg_size - a.avg_size)).abs();
            let bound = 2.0 * a.window as f64 / n as f64;
            checked += 1;
            if gap > bound {
                violations += 1;
            }
            worst_margin = worst_margin.min(bound - gap);
        }
    }
    check(
        9,
        "working-set slope equals miss rate within 2T/N",
        violations == 0,
        format!(
            "{violations} violations over {checked} windows, smallest margin {worst_margin:.2e}"
        ),
    );
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len)
    }
}

/// Random table with plenty of nesting: prefixes are carved out of a few
/// hundred base networks.
fn random_table(rng: &mut ChaCha8Rng, n: usize) -> Vec<(u32, u8)> {
    let bases: Vec<u32> = (0..300).map(|_| rng.random::<u32>()).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let base = bases[rng.random_range(0..bases.len())];
        let len = rng.random_range(8..=28u8);
        let noise = rng.random::<u32>() & !mask(12);
        let net = (base ^ noise) & mask(len);
        out.push((net, len));
    }
    out
}

#[test]
fn criterion_10_prefix_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let raw = random_table(&mut rng, 10_000);
    let table = PrefixTable::new(raw.iter().map(|&(n, l)| Prefix::new(n, l).unwrap()));
    let mut uniq = raw.clone();
    uniq.sort();
    uniq.dedup();

    // O(n²) oracle for more-specific filtering.
    let covered = |&(n, l): &(u32, u8)| uniq.iter().any(|&(m, k)| k < l && (n & mask(k)) == m);
    let mut want: Vec<(u32, u8)> = uniq.iter().copied().filter(|p| !covered(p)).collect();
    want.sort();
    let mut got: Vec<(u32, u8)> = table
        .filter_more_specifics()
        .prefixes()
        .iter()
        .map(|p| (p.network(), p.len()))
        .collect();
    got.sort();
    let filter_ok = got == want;

    // Linear-scan oracle for longest-prefix match.
    let mut lookup_bad = 0;
    for i in 0..20_000 {
        let addr = if i % 2 == 0 {
            let (n, l) = uniq[rng.random_range(0..uniq.len())];
            n | (rng.random::<u32>() & !mask(l))
        } else {
            rng.random::<u32>()
        };
        let oracle = uniq
            .iter()
            .filter(|&&(n, l)| addr & mask(l) == n)
            .max_by_key(|&&(_, l)| l)
            .copied();
        let fast = table
            .lookup(Ipv4Addr::from(addr))
            .map(|p| (p.network(), p.len()));
        if fast != oracle {
            lookup_bad += 1;
        }
    }
    let rho = round2(coverage_ratio(92_800, 142_000).unwrap());
    check(
        10,
        "prefix filtering, lookup and coverage ratio",
        filter_ok && lookup_bad == 0 && rho == 0.65,
        format!(
            "filtered {} of {} unique prefixes (oracle {}), {lookup_bad} lookup mismatches over 20000 addresses, rho {rho}",
            got.len(),
            uniq.len(),
            want.len()
        ),
    );
}

fn deterministic_outputs() -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let law = RankLaw::from_gzipf_exponents(5_000, Q, R, 200).unwrap();
    let rs = generate_irm(&rank_probabilities(&law), 300_000, 77).unwrap();
    let mut trace = Vec::new();
    rs.write_object_trace(&mut trace).unwrap();

    let h = stack_distance_histogram(&rs);
    let curve = miss_rate_curve(&h, &log_sizes(1, 5_000, 40).unwrap()).unwrap();
    let mut sim = Vec::new();
    curve.write_csv(&mut sim).unwrap();

    let rft = rank_frequency(&rs).unwrap();
    let fit = fit_piecewise(&rft.points(5), 3, None).unwrap();
    (trace, sim, fit.to_json().unwrap().into_bytes())
}

#[test]
fn criterion_11_determinism() {
    let first = deterministic_outputs();
    let second = deterministic_outputs();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(deterministic_outputs);
    let same = first == second && first == single;
    check(
        11,
        "byte-identical synth/simulate/fit outputs",
        same,
        format!(
            "trace {} bytes, curve {} bytes, fit {} bytes; repeat equal: {}, single-thread equal: {}",
            first.0.len(),
            first.1.len(),
            first.2.len(),
            first == second,
            first == single
        ),
    );
}
