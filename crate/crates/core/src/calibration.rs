//! Choosing the ladder base `T_r` and step `T_d` against a channel.
//!
//! `T_r` is the shortest square-wave period whose pulses the demodulator
//! times reliably. `T_d` must exceed the spread of intervals measured for a
//! fixed transmitted interval.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{simulate, square_wave, ChannelConfig};
use crate::demodulator::{bin_and_smooth, detect_peaks, peak_intervals, DemodConfig};
use crate::rng::derive_seed;
use crate::units::{format_us, Nanos};
use crate::{Error, Result};

/// Default share of correctly timed periods required by [`estimate_tr`].
pub const DEFAULT_STABILITY: f64 = 1.0 - 1e-4;
/// Default relative tolerance on a measured period.
pub const DEFAULT_PERIOD_TOLERANCE: f64 = 0.1;
/// Default margin applied to the measured spread by [`estimate_td`].
pub const DEFAULT_TD_MARGIN: f64 = 0.1;

/// Intervals measured while a single interval was transmitted repeatedly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalHistogram {
    pub true_interval: Nanos,
    pub samples: Vec<Nanos>,
    pub upper: Nanos,
    pub lower: Nanos,
}

impl IntervalHistogram {
    pub fn new(true_interval: Nanos, samples: Vec<Nanos>) -> Result<Self> {
        let (Some(&lower), Some(&upper)) = (samples.iter().min(), samples.iter().max()) else {
            return Err(Error::Calibration("no intervals measured".into()));
        };
        Ok(IntervalHistogram {
            true_interval,
            samples,
            upper,
            lower,
        })
    }

    /// `T_Upper − T_Lower`.
    pub fn spread(&self) -> Nanos {
        self.upper - self.lower
    }

    pub fn counts(&self) -> BTreeMap<Nanos, usize> {
        let mut m = BTreeMap::new();
        for &s in &self.samples {
            *m.entry(s).or_insert(0) += 1;
        }
        m
    }

    /// `t_d_us,count` rows in ascending interval order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_d_us,count\n");
        for (t, c) in self.counts() {
            let _ = writeln!(out, "{},{c}", format_us(t));
        }
        out
    }
}

/// Detection result for one square-wave period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodStability {
    pub period: Nanos,
    pub measured_intervals: usize,
    pub correct_intervals: usize,
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrEstimate {
    /// Shortest stable period, if any.
    pub tr: Option<Nanos>,
    pub scan: Vec<PeriodStability>,
}

impl TrEstimate {
    pub fn tr(&self) -> Result<Nanos> {
        self.tr
            .ok_or_else(|| Error::Calibration("no period in range was detected stably".into()))
    }
}

/// Intervals the receiver measures for pulses spaced `period` apart (50%
/// duty), `trials` of them after one warm-up interval.
///
/// The first pulse of a stream has no earlier opposite edge and no bins
/// before it to smooth against, so its timing mark is biased; the interval
/// it opens is dropped.
pub fn measure_square_wave(
    channel: &ChannelConfig,
    demod: &DemodConfig,
    period: Nanos,
    trials: usize,
) -> Result<Vec<Nanos>> {
    let schedule = square_wave(period, trials + 2)?;
    let stream = simulate(&schedule, channel)?;
    let signals = bin_and_smooth(&stream, demod)?;
    let mut intervals = peak_intervals(&detect_peaks(&signals, demod));
    if !intervals.is_empty() {
        intervals.remove(0);
    }
    Ok(intervals)
}

/// Scans `periods` and reports the shortest one for which at least
/// `stability` of `trials` intervals are measured within `tolerance·period`.
pub fn estimate_tr(
    channel: &ChannelConfig,
    demod: &DemodConfig,
    periods: &[Nanos],
    trials: usize,
    stability: f64,
    tolerance: f64,
) -> Result<TrEstimate> {
    if trials < 1 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if !(0.0..=1.0).contains(&stability) {
        return Err(Error::invalid("stability must lie in [0, 1]"));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut periods = periods.to_vec();
    periods.sort_unstable();
    periods.dedup();
    let scan = periods
        .par_iter()
        .map(|&p| {
            let c = ChannelConfig {
                seed: derive_seed(channel.seed, p as u64, 0),
                ..channel.clone()
            };
            let measured = measure_square_wave(&c, demod, p, trials)?;
            let tol = tolerance * p as f64;
            let correct = measured
                .iter()
                .filter(|&&t| ((t - p) as f64).abs() <= tol)
                .count()
                .min(trials);
            Ok(PeriodStability {
                period: p,
                measured_intervals: measured.len(),
                correct_intervals: correct,
                stability: correct as f64 / trials as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tr = scan
        .iter()
        .find(|s| s.stability >= stability)
        .map(|s| s.period);
    Ok(TrEstimate { tr, scan })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TdEstimate {
    pub histogram: IntervalHistogram,
    /// `max(ceil(spread·(1 + margin)), bin width)`.
    pub td: Nanos,
}

/// Transmits `trials` copies of `probe_interval` and recommends a ladder step
/// strictly larger than the measured spread.
pub fn estimate_td(
    channel: &ChannelConfig,
    demod: &DemodConfig,
    probe_interval: Nanos,
    trials: usize,
    margin: f64,
) -> Result<TdEstimate> {
    if trials < 2 {
        return Err(Error::invalid("at least two trials are required"));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::invalid("margin must be positive"));
    }
    let samples = measure_square_wave(channel, demod, probe_interval, trials)?;
    if samples.len() < 2 {
        return Err(Error::Calibration(format!(
            "only {} intervals detected at {} ns",
            samples.len(),
            probe_interval
        )));
    }
    let histogram = IntervalHistogram::new(probe_interval, samples)?;
    let td = ((histogram.spread() as f64 * (1.0 + margin)).ceil() as Nanos).max(demod.bin_width);
    Ok(TdEstimate { histogram, td })
}
