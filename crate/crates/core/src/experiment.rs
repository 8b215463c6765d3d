//! Error-rate measurement and Monte-Carlo link experiments.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{frequency_response, simulate, ChannelConfig, FrequencyPoint};
use crate::codebook::Codebook;
use crate::demodulator::{demodulate, DemodConfig, Diagnostics};
use crate::modulator::{default_pulse_width, encode, to_edge_schedule};
use crate::rng::{derive_seed, substream};
use crate::units::{us_f64, Nanos};
use crate::{Error, Result};

/// Symbol and bit error counts of one transmission.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SerReport {
    pub symbols_sent: usize,
    pub symbol_errors: usize,
    pub ser: f64,
    pub bits_sent: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// Transmitted symbols with no received counterpart.
    pub missing_symbols: usize,
    /// Received symbols beyond the transmitted length.
    pub extra_symbols: usize,
    /// Largest `|received − transmitted|` interval over aligned positions.
    pub max_interval_deviation: Option<Nanos>,
}

fn rate(errors: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        errors as f64 / total as f64
    }
}

/// Positional symbol comparison from the start of the stream. Missing and
/// extra positions both count as errors.
pub fn measure_ser(tx: &[usize], rx: &[usize]) -> SerReport {
    let overlap = tx.len().min(rx.len());
    let mismatches = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
    let missing = tx.len() - overlap;
    let extra = rx.len() - overlap;
    let errors = mismatches + missing + extra;
    SerReport {
        symbols_sent: tx.len(),
        symbol_errors: errors,
        ser: rate(errors, tx.len()),
        missing_symbols: missing,
        extra_symbols: extra,
        ..SerReport::default()
    }
}

/// Bit errors over the transmitted length; missing received bits are errors.
pub fn count_bit_errors(tx: &[bool], rx: &[bool]) -> usize {
    let overlap = tx.len().min(rx.len());
    tx.iter().zip(rx).filter(|(a, b)| a != b).count() + (tx.len() - overlap)
}

/// Everything a single run produces, for callers that need more than the
/// error counts.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: SerReport,
    pub diagnostics: Diagnostics,
}

/// Sends random codewords carrying at least `n_symbols` symbols through
/// encode → edge schedule → channel → demodulator and compares.
///
/// The payload and the channel randomness are both derived from `seed`; the
/// `seed` field of `channel` is ignored.
pub fn run_experiment(
    codebook: &Codebook,
    channel: &ChannelConfig,
    demod: &DemodConfig,
    n_symbols: usize,
    seed: u64,
) -> Result<SerReport> {
    run_experiment_detailed(codebook, channel, demod, n_symbols, seed).map(|o| o.report)
}

pub fn run_experiment_detailed(
    codebook: &Codebook,
    channel: &ChannelConfig,
    demod: &DemodConfig,
    n_symbols: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let n = codebook.block_length();
    let l = codebook.payload_bits();
    let blocks = n_symbols.div_ceil(n);
    let mut rng = substream(seed, 0, 0);
    let bits: Vec<bool> = (0..blocks * l).map(|_| rng.random()).collect();

    let tx = encode(&bits, codebook);
    let schedule = to_edge_schedule(&tx.intervals, default_pulse_width(codebook), 0)?;
    let channel = ChannelConfig {
        seed: derive_seed(seed, 1, 0),
        ..channel.clone()
    };
    let stream = simulate(&schedule, &channel)?;
    let rx = demodulate(&stream, codebook, demod)?;

    let mut report = measure_ser(&tx.symbols, &rx.symbols);
    report.bits_sent = bits.len();
    report.bit_errors = count_bit_errors(&bits, &rx.bits);
    report.ber = rate(report.bit_errors, report.bits_sent);
    report.max_interval_deviation = tx
        .intervals
        .iter()
        .zip(&rx.intervals)
        .map(|(a, b)| (a - b).abs())
        .max();
    Ok(ExperimentOutcome {
        report,
        diagnostics: rx.diagnostics,
    })
}

/// Channel parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    /// `σ_t`, values in µs.
    JitterSigma,
    /// `ν`, values in events/s.
    NoiseRate,
    /// `τ_rc`, values in µs.
    LowpassTau,
    /// Square-wave drive frequency, values in Hz.
    Frequency,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::JitterSigma => "jitter_sigma",
            SweepParam::NoiseRate => "noise_rate",
            SweepParam::LowpassTau => "lowpass_tau",
            SweepParam::Frequency => "frequency",
        }
    }

    /// `channel` with this parameter set to `value`.
    pub fn apply(self, channel: &ChannelConfig, value: f64) -> Result<ChannelConfig> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid(format!(
                "{} value must be nonnegative, got {value}",
                self.name()
            )));
        }
        let mut c = channel.clone();
        match self {
            SweepParam::JitterSigma => c.jitter_sigma = us_f64(value),
            SweepParam::NoiseRate => c.noise_rate = value,
            SweepParam::LowpassTau => c.lowpass_tau = us_f64(value),
            SweepParam::Frequency => {
                return Err(Error::invalid("frequency is not a channel parameter"))
            }
        }
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jitter_sigma" | "jitter" => Ok(SweepParam::JitterSigma),
            "noise_rate" | "noise" => Ok(SweepParam::NoiseRate),
            "lowpass_tau" | "lowpass" => Ok(SweepParam::LowpassTau),
            "frequency" | "freq" => Ok(SweepParam::Frequency),
            other => Err(Error::invalid(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// One row of an error-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub ser: f64,
    pub ber: f64,
    pub symbols: usize,
    pub errors: usize,
}

/// Output of [`sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SweepTable {
    ErrorRate(Vec<SweepRow>),
    Frequency(Vec<FrequencyPoint>),
}

impl SweepTable {
    /// `param,value,ser,ber,symbols,errors` for error-rate sweeps,
    /// `freq_hz,positive_per_edge,negative_per_edge` for frequency sweeps.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            SweepTable::ErrorRate(rows) => {
                out.push_str("param,value,ser,ber,symbols,errors\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{:e},{:e},{},{}",
                        r.param, r.value, r.ser, r.ber, r.symbols, r.errors
                    );
                }
            }
            SweepTable::Frequency(points) => {
                out.push_str("freq_hz,positive_per_edge,negative_per_edge\n");
                for p in points {
                    let _ = writeln!(
                        out,
                        "{},{:.6},{:.6}",
                        p.freq_hz, p.positive_per_edge, p.negative_per_edge
                    );
                }
            }
        }
        out
    }
}

/// Runs one experiment (or, for [`SweepParam::Frequency`], one
/// frequency-response point) per value. Every value uses the same `seed`;
/// rows come back in input order. For frequency sweeps `n_symbols` is the
/// number of square-wave cycles.
pub fn sweep(
    param: SweepParam,
    values: &[f64],
    codebook: &Codebook,
    channel: &ChannelConfig,
    demod: &DemodConfig,
    n_symbols: usize,
    seed: u64,
) -> Result<SweepTable> {
    if param == SweepParam::Frequency {
        let channel = ChannelConfig {
            seed,
            ..channel.clone()
        };
        return frequency_response(&channel, values, n_symbols).map(SweepTable::Frequency);
    }
    values
        .par_iter()
        .map(|&v| {
            let c = param.apply(channel, v)?;
            let r = run_experiment(codebook, &c, demod, n_symbols, seed)?;
            Ok(SweepRow {
                param: param.name(),
                value: v,
                ser: r.ser,
                ber: r.ber,
                symbols: r.symbols_sent,
                errors: r.symbol_errors,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(SweepTable::ErrorRate)
}

/// Largest swept value, scanning upward from the smallest, for which SER
/// stays below `max_ser` at it and every smaller value. `None` if even the
/// smallest value fails.
pub fn feasibility_threshold(rows: &[SweepRow], max_ser: f64) -> Option<f64> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    sorted
        .into_iter()
        .take_while(|r| r.ser < max_ser)
        .last()
        .map(|r| r.value)
}
