//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! `criterion N: PASS|FAIL` line of every check is always printed; the
//! process exits non-zero if any criterion fails.

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eim_core::codebook::{DEFAULT_EPSILON, DEFAULT_N_MAX};
use eim_core::demodulator::is_out_of_range;
use eim_core::experiment::feasibility_threshold;
use eim_core::units::us;
use eim_core::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

// Pinned tolerances.
const MOD1_BITRATE: f64 = 28_169.014_084_507_04; // 2·4 bits / 284 µs
const MOD1_BITRATE_TOL: f64 = 1e-6;
const MOD2_BITRATE_RANGE: (f64, f64) = (8_300.0, 8_500.0);
const SER_TARGET: f64 = 1e-4;
const HIGH_JITTER_SER_FLOOR: f64 = 0.1;
const Z95: f64 = 1.959_963_984_540_054;
const PROPERTY_CASES: u32 = 1_000;

fn verdict(n: u32, ok: bool, detail: impl std::fmt::Display) {
    println!(
        "criterion {n}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn preset(n: u8) -> Codebook {
    let a = match n {
        1 => build_alphabet(us(32), us(26), 4),
        _ => build_alphabet(us(160), us(60), 6),
    }
    .unwrap();
    Codebook::design(&a, DEFAULT_N_MAX).unwrap()
}

/// Wilson score interval for `k` successes in `n` trials. Error counts can
/// exceed `n` when the receiver inserts symbols; those saturate at `n`.
fn wilson(k: usize, n: usize) -> (f64, f64) {
    let (k, n) = (k.min(n) as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn criterion_1_design_table() {
    let t = Instant::now();
    let c1 = preset(1);
    let b1 = bitrate_general(&c1);
    let c2 = preset(2);
    let b2 = bitrate_general(&c2);
    let elapsed = t.elapsed();

    let ok = c1.block_length() == 1
        && c1.payload_bits() == 2
        && (b1 - MOD1_BITRATE).abs() < MOD1_BITRATE_TOL
        && c2.block_length() == 7
        && c2.payload_bits() == 18
        && c2.len() == 1 << 18
        && (MOD2_BITRATE_RANGE.0..=MOD2_BITRATE_RANGE.1).contains(&b2)
        && elapsed < Duration::from_secs(10);
    verdict(
        1,
        ok,
        format!(
            "M=4: N*={} L={} B={b1:.3} bps; M=6: N*={} L={} B={b2:.3} bps; {elapsed:.2?}",
            c1.block_length(),
            c1.payload_bits(),
            c2.block_length(),
            c2.payload_bits()
        ),
    );
    assert!(ok);
}

fn criterion_2_m_sweep() {
    let t = Instant::now();
    let s1 = sweep_m(us(32), us(26), 2..=8, DEFAULT_N_MAX, DEFAULT_EPSILON).unwrap();
    let s2 = sweep_m(us(160), us(60), 2..=8, DEFAULT_N_MAX, DEFAULT_EPSILON).unwrap();
    // The sweep works from duration distributions; cross-check the two
    // contenders against fully enumerated codebooks.
    let enumerated_agree = [5, 6].iter().all(|&m| {
        let cb =
            Codebook::design(&build_alphabet(us(160), us(60), m).unwrap(), DEFAULT_N_MAX).unwrap();
        (bitrate_general(&cb) - s2.point(m).unwrap().bitrate_bps).abs() < 1e-9
    });
    let elapsed = t.elapsed();

    let ok = s1.argmax_m == 5
        && s1.selected_m == 4
        && [5, 6].contains(&s2.argmax_m)
        && enumerated_agree
        && elapsed < Duration::from_secs(60);
    verdict(
        2,
        ok,
        format!(
            "(32,26): argmax M={} selected M={}; (160,60): argmax M={} (selected M={}); {elapsed:.2?}",
            s1.argmax_m, s1.selected_m, s2.argmax_m, s2.selected_m
        ),
    );
    assert!(ok);
}

/// Minimum sum over all size-`k` subsets of `durations`. Subsets with the
/// same number of members from each duration class have the same sum, so
/// the search runs over those count profiles, exhaustively.
fn brute_min_subset_sum(durations: &[Nanos], k: usize) -> Option<i128> {
    let mut classes: Vec<(Nanos, usize)> = Vec::new();
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    for d in sorted {
        match classes.last_mut() {
            Some((v, c)) if *v == d => *c += 1,
            _ => classes.push((d, 1)),
        }
    }
    fn go(classes: &[(Nanos, usize)], k: usize, acc: i128, best: &mut Option<i128>) {
        let Some(((d, c), rest)) = classes.split_first() else {
            if k == 0 {
                *best = Some(best.map_or(acc, |b| b.min(acc)));
            }
            return;
        };
        let left: usize = rest.iter().map(|x| x.1).sum();
        for take in 0..=(*c).min(k) {
            if k - take <= left {
                go(rest, k - take, acc + *d as i128 * take as i128, best);
            }
        }
    }
    let mut best = None;
    go(&classes, k, 0, &mut best);
    best
}

fn all_tuple_durations(a: &SymbolAlphabet, n: usize) -> Vec<Nanos> {
    let mut out = vec![0];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|&d| a.intervals().iter().map(move |&t| d + t))
            .collect();
    }
    out
}

fn criterion_3_selection_matches_brute_force() {
    let ladders = [(32, 26), (160, 60), (10, 3), (5, 7), (1, 1)];
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (tr, td) in ladders {
        for m in 2..=4 {
            let a = build_alphabet(us(tr), us(td), m).unwrap();
            for n in 1..=4 {
                let l = payload_bits(m, n).unwrap();
                let cb = select_codewords(&a, n, l).unwrap();
                let brute = brute_min_subset_sum(&all_tuple_durations(&a, n), 1 << l).unwrap();
                checked += 1;
                if cb.total_duration() != brute {
                    mismatches.push((tr, td, m, n));
                }
            }
        }
    }
    let ok = mismatches.is_empty();
    verdict(
        3,
        ok,
        format!("{checked} (ladder, M, N) cases, mismatches: {mismatches:?}"),
    );
    assert!(ok);
}

fn criterion_4_noiseless_identity() {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for p in [1, 2] {
        let cb = preset(p);
        let demod = DemodConfig::for_alphabet(cb.alphabet());
        let r = run_experiment(&cb, &ChannelConfig::noiseless(), &demod, 10_000, 2024).unwrap();
        ok &= r.symbol_errors == 0 && r.bit_errors == 0 && r.symbols_sent >= 10_000;
        details.push(format!(
            "preset {p}: {} symbols, SER={}",
            r.symbols_sent, r.ser
        ));
    }
    let elapsed = t.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    verdict(4, ok, format!("{}; {elapsed:.2?}", details.join("; ")));
    assert!(ok);
}

fn criterion_5_guard_band_jitter() {
    let mut ok = true;
    let mut details = Vec::new();
    for p in [1, 2] {
        let cb = preset(p);
        let td = cb.alphabet().td();
        let demod = DemodConfig::for_alphabet(cb.alphabet());
        let base = ChannelConfig::default();

        let low = ChannelConfig {
            jitter_sigma: td / 20,
            ..base.clone()
        };
        let r = run_experiment(&cb, &low, &demod, 100_000, 5).unwrap();
        let (_, hi) = wilson(r.symbol_errors, r.symbols_sent);
        ok &= hi < SER_TARGET;
        details.push(format!(
            "preset {p} σ=T_d/20: {}/{} errors (95% upper {hi:.2e})",
            r.symbol_errors, r.symbols_sent
        ));

        let high = ChannelConfig {
            jitter_sigma: td,
            ..base
        };
        let r = run_experiment(&cb, &high, &demod, 100_000, 6).unwrap();
        let (lo, _) = wilson(r.symbol_errors, r.symbols_sent);
        ok &= lo > HIGH_JITTER_SER_FLOOR;
        details.push(format!(
            "preset {p} σ=T_d: SER={:.3} (95% lower {lo:.3})",
            r.ser
        ));
    }
    verdict(5, ok, details.join("; "));
    assert!(ok);
}

fn criterion_6_jitter_threshold() {
    const STEP_US: f64 = 0.5;
    const N: usize = 30_000;
    let cb = preset(1);
    let demod = DemodConfig::for_alphabet(cb.alphabet());
    let base = ChannelConfig::default();
    let grid: Vec<f64> = (1..=24).map(|i| i as f64 * STEP_US).collect();
    let table = sweep(SweepParam::JitterSigma, &grid, &cb, &base, &demod, N, 11).unwrap();
    let experiment::SweepTable::ErrorRate(rows) = table else {
        unreachable!()
    };
    let threshold = feasibility_threshold(&rows, SER_TARGET);

    // Re-measure either side of the reported boundary on fresh seeds: one
    // step below must still meet the target, two steps above must not.
    let at = |sigma_us: f64, seed: u64| {
        let c = SweepParam::JitterSigma.apply(&base, sigma_us).unwrap();
        run_experiment(&cb, &c, &demod, N, seed).unwrap().ser
    };
    let (ok, detail) = match threshold {
        Some(s) if s < grid[grid.len() - 1] => {
            let below = if s - STEP_US >= grid[0] {
                at(s - STEP_US, 101)
            } else {
                0.0
            };
            let above = at(s + 2.0 * STEP_US, 102);
            (
                below < SER_TARGET && above >= SER_TARGET,
                format!(
                    "σ* = {s} µs on a {STEP_US} µs grid; fresh seeds: SER({:.1})={below:.2e}, SER({:.1})={above:.2e}",
                    s - STEP_US,
                    s + 2.0 * STEP_US
                ),
            )
        }
        other => (false, format!("no interior threshold found: {other:?}")),
    };
    verdict(6, ok, detail);
    assert!(ok);
}

fn criterion_7_frequency_response() {
    let t = Instant::now();
    let freqs: Vec<f64> = [1, 2, 5, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100]
        .iter()
        .map(|k| *k as f64 * 1e3)
        .collect();
    let cycles = 2_000;

    // Deterministic counts, no refractory loss: exact model shape.
    let exact = ChannelConfig {
        deterministic_counts: true,
        refractory: 0,
        noise_rate: 0.0,
        ..ChannelConfig::default()
    };
    let fr = frequency_response(&exact, &freqs, cycles).unwrap();
    let nonincreasing = fr.windows(2).all(|w| {
        w[1].positive_per_edge <= w[0].positive_per_edge
            && w[1].negative_per_edge <= w[0].negative_per_edge
    });

    // Default (Poisson) channel: nonincreasing within sampling noise, and a
    // faster pixel strictly better above 20 kHz.
    let noisy = frequency_response(&ChannelConfig::default(), &freqs, cycles).unwrap();
    let se = |p: &FrequencyPoint| (p.positive_per_edge / cycles as f64).sqrt();
    let noisy_nonincreasing = noisy
        .windows(2)
        .all(|w| w[1].positive_per_edge <= w[0].positive_per_edge + 3.0 * (se(&w[0]) + se(&w[1])));
    let fast = ChannelConfig {
        lowpass_tau: ChannelConfig::default().lowpass_tau / 2,
        ..ChannelConfig::default()
    };
    let fast_fr = frequency_response(&fast, &freqs, cycles).unwrap();
    // Rounding λ·s in deterministic mode can tie two bandwidths, so there
    // the faster pixel only has to be no worse; the strict gain is asserted on
    // the Poisson means with a 3-standard-error margin.
    let exact_fast = frequency_response(
        &ChannelConfig {
            lowpass_tau: exact.lowpass_tau / 2,
            ..exact.clone()
        },
        &freqs,
        cycles,
    )
    .unwrap();
    let faster_wins = freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 20e3)
        .all(|(i, _)| {
            fast_fr[i].positive_per_edge
                > noisy[i].positive_per_edge + 3.0 * (se(&fast_fr[i]) + se(&noisy[i]))
                && exact_fast[i].positive_per_edge >= fr[i].positive_per_edge
        });
    let elapsed = t.elapsed();
    let ok =
        nonincreasing && noisy_nonincreasing && faster_wins && elapsed < Duration::from_secs(10);
    let last = freqs.len() - 1;
    verdict(
        7,
        ok,
        format!(
            "nonincreasing: exact={nonincreasing} poisson={noisy_nonincreasing}; τ_rc/2 beats τ_rc above 20 kHz: {faster_wins} \
             (100 kHz: {:.1} vs {:.1} events/edge); {elapsed:.2?}",
            fast_fr[last].positive_per_edge, noisy[last].positive_per_edge
        ),
    );
    assert!(ok);
}

/// Random uniform ladder with the channel-free demodulator parameters.
fn ladder() -> impl Strategy<Value = SymbolAlphabet> {
    (1_000i64..200_000, 100i64..100_000, 2usize..=16)
        .prop_map(|(tr, td, m)| build_alphabet(tr, td, m).unwrap())
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

/// Random pulse train rendered through a light channel: the sort of stream
/// the detector sees.
fn pulse_stream() -> impl Strategy<Value = (EventStream, DemodConfig)> {
    (
        prop::collection::vec(0usize..6, 1..40),
        any::<u64>(),
        0i64..3_000,
        1usize..8,
    )
        .prop_map(|(symbols, seed, jitter, k)| {
            let a = build_alphabet(us(40), us(20), 6).unwrap();
            let intervals: Vec<Nanos> = symbols.iter().map(|&s| a.interval(s)).collect();
            let schedule = to_edge_schedule(&intervals, us(20), 0).unwrap();
            let channel = ChannelConfig {
                pixel_count: k,
                jitter_sigma: jitter,
                seed,
                ..ChannelConfig::default()
            };
            (
                simulate(&schedule, &channel).unwrap(),
                DemodConfig::for_alphabet(&a),
            )
        })
}

fn criterion_8_demodulator_invariants() {
    let guard = run_property(
        "guard band",
        (ladder(), any::<prop::sample::Index>(), -1.0f64..1.0),
        |(a, idx, frac)| {
            let i = idx.index(a.len());
            // Strictly inside ±T_d/2.
            let half = (a.td() - 1) / 2;
            let dev = (frac * half as f64) as Nanos;
            let t = a.interval(i) + dev;
            prop_assert_eq!(quantize_interval(t, &a), i);
            prop_assert!(!is_out_of_range(t, &a));
            Ok(())
        },
    );

    let monotone = run_property("peak monotonicity", pulse_stream(), |(stream, demod)| {
        let peaks = detect_peaks(&bin_and_smooth(&stream, &demod).unwrap(), &demod);
        prop_assert!(peaks.times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(peak_intervals(&peaks).iter().all(|&d| d > 0));
        Ok(())
    });

    let shift = run_property(
        "time-shift invariance",
        (pulse_stream(), 0i64..1_000_000_000),
        |((stream, demod), dt)| {
            let a = detect_peaks(&bin_and_smooth(&stream, &demod).unwrap(), &demod);
            let b = detect_peaks(
                &bin_and_smooth(&stream.shifted(dt), &demod).unwrap(),
                &demod,
            );
            prop_assert_eq!(peak_intervals(&a), peak_intervals(&b));
            prop_assert_eq!(a.erasures, b.erasures);
            let moved: Vec<Nanos> = a.times.iter().map(|t| t + dt).collect();
            prop_assert_eq!(moved, b.times);
            Ok(())
        },
    );

    let results = [guard, monotone, shift];
    let ok = results.iter().all(Result::is_ok);
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    verdict(
        8,
        ok,
        if ok {
            format!(
                "guard band, peak monotonicity, time-shift invariance: {PROPERTY_CASES} cases each"
            )
        } else {
            format!("{failures:?}")
        },
    );
    assert!(ok);
}

fn main() -> ExitCode {
    let criteria: [(u32, fn()); 8] = [
        (1, criterion_1_design_table),
        (2, criterion_2_m_sweep),
        (3, criterion_3_selection_matches_brute_force),
        (4, criterion_4_noiseless_identity),
        (5, criterion_5_guard_band_jitter),
        (6, criterion_6_jitter_threshold),
        (7, criterion_7_frequency_response),
        (8, criterion_8_demodulator_invariants),
    ];
    let mut failed = Vec::new();
    for (n, check) in criteria {
        // Each check prints its own verdict before asserting; a panic before
        // that point (an unexpected error) still gets a FAIL line here.
        if panic::catch_unwind(check).is_err() {
            println!("criterion {n}: FAIL (see panic above)");
            failed.push(n);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
