//! Event stream to symbols and bits.
//!
//! 1. Events are histogrammed per polarity and smoothed with a centred moving
//!    average, giving the rate signals `r_p` and `r_n`.
//! 2. A negative flag is raised when `r_n` exceeds its threshold while
//!    `r_n >= r_p`, and lowered at the first bin where `r_p > r_n`.
//! 3. While the flag is down, the first local maximum of `r_p` is the timing
//!    mark of the pulse; at most one mark per flag-down episode.
//! 4. Differences of consecutive marks are the received intervals; each is
//!    quantized to the nearest alphabet interval.
//! 5. Symbols are grouped into blocks of `N*` and mapped to codewords, with
//!    non-codeword blocks sent to the nearest codeword.

use serde::Serialize;

use crate::channel::{EventStream, Polarity};
use crate::codebook::{Codebook, SymbolAlphabet};
use crate::modulator::value_bits;
use crate::units::{us, Nanos};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemodConfig {
    /// Histogram bin width.
    pub bin_width: Nanos,
    /// Moving-average width in bins; odd.
    pub smooth_window: usize,
    /// `r_n` level (smoothed events per bin) that raises the negative flag.
    pub neg_threshold: f64,
    /// Minimum `r_p` for a local maximum to count as a timing mark.
    pub pos_threshold: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        DemodConfig {
            bin_width: us(1),
            smooth_window: 3,
            neg_threshold: 1.0,
            pos_threshold: 1.0,
        }
    }
}

impl DemodConfig {
    /// Defaults with bin width `max(1 µs, T_d/8)`.
    pub fn for_alphabet(alphabet: &SymbolAlphabet) -> Self {
        DemodConfig {
            bin_width: us(1).max(alphabet.td() / 8),
            ..DemodConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_width <= 0 {
            return Err(Error::invalid("bin width must be positive"));
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(Error::invalid("smoothing window must be an odd bin count"));
        }
        if !(self.neg_threshold >= 0.0 && self.pos_threshold >= 0.0) {
            return Err(Error::invalid("thresholds must be nonnegative"));
        }
        Ok(())
    }
}

/// Smoothed per-polarity event rates on a uniform bin grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampledSignals {
    /// Start of bin 0.
    pub t_start: Nanos,
    pub bin_width: Nanos,
    pub r_p: Vec<f64>,
    pub r_n: Vec<f64>,
}

impl SampledSignals {
    pub fn len(&self) -> usize {
        self.r_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_p.is_empty()
    }

    pub fn bin_center(&self, j: usize) -> Nanos {
        self.t_start + j as Nanos * self.bin_width + self.bin_width / 2
    }
}

/// Timing marks, one per detected pulse.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PeakTimes {
    pub times: Vec<Nanos>,
    /// Flag-down episodes that ended without a qualifying maximum.
    pub erasures: usize,
}

/// Centred moving average; near the ends the window shrinks to the bins
/// that exist.
fn moving_average(x: &[u32], w: usize) -> Vec<f64> {
    let n = x.len();
    let half = w / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v as u64);
    }
    (0..n)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half + 1).min(n);
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Histograms both polarities over `[first event, last event]` and smooths.
pub fn bin_and_smooth(stream: &EventStream, config: &DemodConfig) -> Result<SampledSignals> {
    config.validate()?;
    let events = stream.events();
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Ok(SampledSignals {
            bin_width: config.bin_width,
            ..SampledSignals::default()
        });
    };
    let b = config.bin_width;
    let t0 = first.t;
    let bins = ((last.t - t0) / b) as usize + 1;
    let mut pos = vec![0u32; bins];
    let mut neg = vec![0u32; bins];
    for e in events {
        let j = ((e.t - t0) / b) as usize;
        match e.polarity {
            Polarity::Positive => pos[j] += 1,
            Polarity::Negative => neg[j] += 1,
        }
    }
    Ok(SampledSignals {
        t_start: t0,
        bin_width: b,
        r_p: moving_average(&pos, config.smooth_window),
        r_n: moving_average(&neg, config.smooth_window),
    })
}

/// Runs the negative-flag state machine and returns the first local maximum
/// of `r_p` in every flag-down episode.
///
/// A bin `j` is a local maximum when `r_p[j-1] < r_p[j] >= r_p[j+1]`
/// (missing neighbours count as zero), so a plateau resolves to its first
/// bin. Bins before the flag clears are masked: the bin where it clears
/// counts as rising, so a plateau that began under the flag resolves to its
/// first unmasked bin. The mark is the bin centre.
pub fn detect_peaks(signals: &SampledSignals, config: &DemodConfig) -> PeakTimes {
    let (rp, rn) = (&signals.r_p, &signals.r_n);
    let n = rp.len().min(rn.len());
    let at = |j: isize| -> f64 {
        if j < 0 || j as usize >= n {
            0.0
        } else {
            rp[j as usize]
        }
    };
    let mut out = PeakTimes::default();
    let mut flag = false;
    let mut emitted = false;
    let mut episode_start = 0;
    for j in 0..n {
        if !flag && rn[j] > config.neg_threshold && rn[j] >= rp[j] {
            flag = true;
            if !emitted {
                out.erasures += 1;
            }
        } else if flag && rp[j] > rn[j] {
            flag = false;
            emitted = false;
            episode_start = j;
        }
        if flag || emitted {
            continue;
        }
        let (prev, cur, next) = (at(j as isize - 1), rp[j], at(j as isize + 1));
        let rising = prev < cur || (j == episode_start && j > 0);
        if rising && cur >= next && cur >= config.pos_threshold {
            out.times.push(signals.bin_center(j));
            emitted = true;
        }
    }
    out
}

/// Differences of consecutive timing marks.
pub fn peak_intervals(peaks: &PeakTimes) -> Vec<Nanos> {
    peaks.times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Index (0-based) of the alphabet interval closest to `t_d`. Exact
/// midpoints go to the smaller index.
pub fn quantize_interval(t_d: Nanos, alphabet: &SymbolAlphabet) -> usize {
    let tau = alphabet.intervals();
    // First interval not below t_d; the answer is it or its predecessor.
    let hi = tau.partition_point(|&x| x < t_d);
    if hi == 0 {
        return 0;
    }
    if hi == tau.len() {
        return tau.len() - 1;
    }
    if t_d - tau[hi - 1] <= tau[hi] - t_d {
        hi - 1
    } else {
        hi
    }
}

/// Whether `t_d` lies outside the half-step guard band around the ladder's
/// end points, where quantization clamps.
pub fn is_out_of_range(t_d: Nanos, alphabet: &SymbolAlphabet) -> bool {
    let tau = alphabet.intervals();
    let m = tau.len();
    let lo = tau[0] - (tau[1] - tau[0]) / 2;
    let hi = tau[m - 1] + (tau[m - 1] - tau[m - 2]) / 2;
    t_d < lo || t_d > hi
}

/// Decoder counters, reported alongside every demodulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub peaks_detected: usize,
    pub symbols_decoded: usize,
    pub erasures: usize,
    pub exact_matches: usize,
    pub nearest_match_corrections: usize,
    /// Symbols left over after the last complete block.
    pub trailing_symbols_discarded: usize,
    /// Intervals outside the ladder's guard band.
    pub low_confidence: usize,
}

impl Diagnostics {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "peaks_detected: {}\nsymbols_decoded: {}\nerasures: {}\nexact_matches: {}\n\
             nearest_match_corrections: {}\ntrailing_symbols_discarded: {}\nlow_confidence: {}\n",
            self.peaks_detected,
            self.symbols_decoded,
            self.erasures,
            self.exact_matches,
            self.nearest_match_corrections,
            self.trailing_symbols_discarded,
            self.low_confidence
        )
    }
}

/// Output of [`decide_bits`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decision {
    pub bits: Vec<bool>,
    pub codewords: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Groups symbols into `N*`-blocks from the start and emits each block's
/// payload value. Non-codeword blocks map to the nearest codeword; a trailing
/// partial block is dropped.
pub fn decide_bits(symbols: &[usize], codebook: &Codebook) -> Decision {
    let n = codebook.block_length();
    let l = codebook.payload_bits();
    let m = codebook.alphabet().len();
    let blocks = symbols.len() / n;
    let mut out = Decision {
        bits: Vec::with_capacity(blocks * l),
        codewords: Vec::with_capacity(blocks),
        diagnostics: Diagnostics {
            symbols_decoded: symbols.len(),
            trailing_symbols_discarded: symbols.len() % n,
            ..Diagnostics::default()
        },
    };
    let mut tuple = vec![0u16; n];
    for block in symbols.chunks_exact(n) {
        for (d, &s) in tuple.iter_mut().zip(block) {
            *d = s.min(m - 1) as u16;
        }
        let k = match codebook.index_of(&tuple) {
            Some(k) => {
                out.diagnostics.exact_matches += 1;
                k
            }
            None => {
                out.diagnostics.nearest_match_corrections += 1;
                codebook.nearest(&tuple)
            }
        };
        out.codewords.push(k);
        value_bits(k, l, &mut out.bits);
    }
    out
}

/// Result of [`demodulate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Demodulated {
    pub bits: Vec<bool>,
    /// 0-based alphabet index per received interval.
    pub symbols: Vec<usize>,
    pub codewords: Vec<usize>,
    pub intervals: Vec<Nanos>,
    pub diagnostics: Diagnostics,
}

/// Full receive chain from events to bits.
pub fn demodulate(
    stream: &EventStream,
    codebook: &Codebook,
    config: &DemodConfig,
) -> Result<Demodulated> {
    let signals = bin_and_smooth(stream, config)?;
    let peaks = detect_peaks(&signals, config);
    let intervals = peak_intervals(&peaks);
    let alphabet = codebook.alphabet();
    let symbols: Vec<usize> = intervals
        .iter()
        .map(|&t| quantize_interval(t, alphabet))
        .collect();
    let low_confidence = intervals
        .iter()
        .filter(|&&t| is_out_of_range(t, alphabet))
        .count();
    let decision = decide_bits(&symbols, codebook);
    Ok(Demodulated {
        bits: decision.bits,
        codewords: decision.codewords,
        diagnostics: Diagnostics {
            peaks_detected: peaks.times.len(),
            erasures: peaks.erasures,
            low_confidence,
            ..decision.diagnostics
        },
        symbols,
        intervals,
    })
}

/// Packs bits MSB-first into lowercase hex, zero-padding the last nibble.
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = (0..4).fold(0u8, |acc, i| {
                (acc << 1) | c.get(i).copied().unwrap_or(false) as u8
            });
            char::from_digit(v as u32, 16).unwrap()
        })
        .collect()
}

/// Inverse of [`bits_to_hex`]; whitespace is ignored.
pub fn hex_to_bits(hex: &str) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars().filter(|c| !c.is_whitespace()) {
        let v = c
            .to_digit(16)
            .ok_or_else(|| Error::invalid(format!("`{c}` is not a hex digit")))?;
        bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Event;
    use crate::codebook::{build_alphabet, select_codewords};

    fn signals(rp: Vec<f64>, rn: Vec<f64>) -> SampledSignals {
        SampledSignals {
            t_start: 0,
            bin_width: 1000,
            r_p: rp,
            r_n: rn,
        }
    }

    fn cfg(w: usize) -> DemodConfig {
        DemodConfig {
            bin_width: 1000,
            smooth_window: w,
            ..DemodConfig::default()
        }
    }

    fn positives(ts: &[(Nanos, usize)]) -> EventStream {
        let mut ev = Vec::new();
        for &(t, n) in ts {
            ev.extend(std::iter::repeat_n(
                Event {
                    t,
                    polarity: Polarity::Positive,
                },
                n,
            ));
        }
        EventStream::from_unsorted(ev)
    }

    #[test]
    fn single_bin_histogram() {
        let s = bin_and_smooth(&positives(&[(500, 5)]), &cfg(1)).unwrap();
        assert_eq!(s.r_p, vec![5.0]);
        assert_eq!(s.r_n, vec![0.0]);
    }

    #[test]
    fn edge_bins_use_shrunken_window() {
        // Negative events pin the grid to three bins with positives [0, 3, 0].
        let mut ev = vec![
            Event {
                t: 0,
                polarity: Polarity::Negative,
            },
            Event {
                t: 2000,
                polarity: Polarity::Negative,
            },
        ];
        ev.extend(std::iter::repeat_n(
            Event {
                t: 1000,
                polarity: Polarity::Positive,
            },
            3,
        ));
        let s = bin_and_smooth(&EventStream::from_unsorted(ev), &cfg(3)).unwrap();
        assert_eq!(s.r_p, vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn empty_stream_gives_empty_signals() {
        let s = bin_and_smooth(&EventStream::default(), &cfg(3)).unwrap();
        assert!(s.is_empty());
        assert!(detect_peaks(&s, &cfg(3)).times.is_empty());
    }

    #[test]
    fn first_local_max_of_a_burst() {
        let s = signals(vec![0.0, 2.0, 5.0, 3.0, 0.0], vec![0.0; 5]);
        let p = detect_peaks(&s, &cfg(1));
        assert_eq!(p.times, vec![2500]);
    }

    #[test]
    fn plateau_resolves_to_first_bin() {
        let s = signals(vec![0.0, 4.0, 4.0, 1.0], vec![0.0; 4]);
        assert_eq!(detect_peaks(&s, &cfg(1)).times, vec![1500]);
    }

    #[test]
    fn one_mark_per_episode() {
        // Two bumps with no negative burst between them: only the first counts.
        let s = signals(
            vec![0.0, 3.0, 1.0, 4.0, 0.0, 0.0, 0.0, 2.0, 5.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0],
        );
        assert_eq!(detect_peaks(&s, &cfg(1)).times, vec![1500, 8500]);
    }

    #[test]
    fn plateau_starting_under_the_flag_is_kept() {
        // The negative tail ties the positive head in bin 2, so the flag only
        // clears in bin 3, one bin into the plateau.
        let s = signals(
            vec![0.0, 0.0, 8.0, 8.0, 8.0, 0.0],
            vec![8.0, 8.0, 8.0, 0.0, 0.0, 0.0],
        );
        let p = detect_peaks(&s, &cfg(1));
        assert_eq!(p.times, vec![3500]);
        assert_eq!(p.erasures, 1);
    }

    #[test]
    fn negative_tail_does_not_reraise_the_flag() {
        let s = signals(vec![0.0, 6.0, 2.0, 0.0], vec![4.0, 3.0, 1.0, 0.0]);
        assert_eq!(detect_peaks(&s, &cfg(1)).times, vec![1500]);
    }

    #[test]
    fn below_threshold_and_zero_signals() {
        let s = signals(vec![0.0, 0.5, 0.0], vec![0.0; 3]);
        assert!(detect_peaks(&s, &cfg(1)).times.is_empty());
        let z = signals(vec![0.0; 10], vec![0.0; 10]);
        assert!(detect_peaks(&z, &cfg(1)).times.is_empty());
    }

    #[test]
    fn episode_without_mark_is_an_erasure() {
        let s = signals(
            vec![0.0, 3.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0],
        );
        let p = detect_peaks(&s, &cfg(1));
        assert_eq!(p.times, vec![1500]);
        assert_eq!(p.erasures, 1);
    }

    #[test]
    fn intervals_are_differences() {
        let p = PeakTimes {
            times: vec![0, us(100), us(158)],
            erasures: 0,
        };
        assert_eq!(peak_intervals(&p), vec![us(100), us(58)]);
        let one = PeakTimes {
            times: vec![5],
            erasures: 0,
        };
        assert!(peak_intervals(&one).is_empty());
    }

    #[test]
    fn quantization() {
        let a = build_alphabet(us(32), us(26), 4).unwrap();
        assert_eq!(quantize_interval(us(100), &a), 3);
        assert_eq!(quantize_interval(us(58), &a), 1);
        assert_eq!(quantize_interval(us(71), &a), 1);
        assert_eq!(quantize_interval(us(71) + 1, &a), 2);
        assert_eq!(quantize_interval(1, &a), 0);
        assert_eq!(quantize_interval(us(10_000), &a), 3);
        assert!(is_out_of_range(us(10_000), &a));
        assert!(is_out_of_range(us(18), &a));
        assert!(!is_out_of_range(us(19), &a));
        assert!(!is_out_of_range(us(123), &a));
    }

    #[test]
    fn modulation1_decisions() {
        let cb = select_codewords(&build_alphabet(us(32), us(26), 4).unwrap(), 1, 2).unwrap();
        let d = decide_bits(&[0, 3, 2, 1], &cb);
        let want: Vec<bool> = [0, 0, 1, 1, 1, 0, 0, 1].iter().map(|&b| b == 1).collect();
        assert_eq!(d.bits, want);
        assert_eq!(d.diagnostics.exact_matches, 4);
        assert_eq!(decide_bits(&[], &cb), Decision::default());
    }

    #[test]
    fn trailing_partial_block_is_dropped() {
        let a = build_alphabet(10, 10, 3).unwrap();
        let cb = select_codewords(&a, 2, 3).unwrap();
        let d = decide_bits(&[0, 0, 1], &cb);
        assert_eq!(d.codewords, vec![0]);
        assert_eq!(d.diagnostics.trailing_symbols_discarded, 1);
        let d = decide_bits(&[2, 2], &cb);
        assert_eq!(d.diagnostics.nearest_match_corrections, 1);
    }

    #[test]
    fn hex_packing() {
        let bits: Vec<bool> = "101100001".chars().map(|c| c == '1').collect();
        assert_eq!(bits_to_hex(&bits), "b08");
        assert_eq!(&hex_to_bits("b08").unwrap()[..9], &bits[..]);
        assert!(hex_to_bits("xy").is_err());
        assert_eq!(bits_to_hex(&[]), "");
    }

    #[test]
    fn config_validation() {
        assert!(DemodConfig {
            smooth_window: 2,
            ..DemodConfig::default()
        }
        .validate()
        .is_err());
        assert!(DemodConfig {
            bin_width: 0,
            ..DemodConfig::default()
        }
        .validate()
        .is_err());
        assert!(DemodConfig {
            neg_threshold: -1.0,
            ..DemodConfig::default()
        }
        .validate()
        .is_err());
        let a = build_alphabet(us(160), us(60), 6).unwrap();
        assert_eq!(DemodConfig::for_alphabet(&a).bin_width, 7500);
        let a = build_alphabet(us(10), us(4), 6).unwrap();
        assert_eq!(DemodConfig::for_alphabet(&a).bin_width, us(1));
    }
}
