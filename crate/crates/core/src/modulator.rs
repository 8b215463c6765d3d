//! Payload bits to intervals, and intervals to transmitter edges.
//!
//! Each rising edge marks a symbol boundary: the gap between consecutive
//! rising edges is the modulated interval. Falling edges end each pulse a
//! fixed `pulse_width` later, so the receiver sees a negative burst between
//! any two positive ones. One extra pulse closes the last interval.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::Serialize;

use crate::codebook::Codebook;
use crate::units::{format_us, parse_us, Nanos};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeDirection {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub t: Nanos,
    pub direction: EdgeDirection,
}

/// Ideal on/off waveform of the transmitter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeSchedule {
    edges: Vec<Edge>,
    pulse_width: Nanos,
}

impl EdgeSchedule {
    /// Validates alternation (starting rising), ordering and constant pulse
    /// width.
    pub fn new(edges: Vec<Edge>, pulse_width: Nanos) -> Result<Self> {
        if pulse_width <= 0 {
            return Err(Error::invalid("pulse width must be positive"));
        }
        for (i, e) in edges.iter().enumerate() {
            let want = if i % 2 == 0 {
                EdgeDirection::Rising
            } else {
                EdgeDirection::Falling
            };
            if e.direction != want {
                return Err(Error::invalid(format!(
                    "edge {i} breaks rising/falling alternation"
                )));
            }
            if i > 0 && e.t <= edges[i - 1].t {
                return Err(Error::invalid(format!(
                    "edge {i} is not after edge {}",
                    i - 1
                )));
            }
            if e.direction == EdgeDirection::Falling && e.t - edges[i - 1].t != pulse_width {
                return Err(Error::invalid(format!(
                    "pulse ending at edge {i} has the wrong width"
                )));
            }
        }
        if !edges.len().is_multiple_of(2) {
            return Err(Error::invalid("schedule ends with an unterminated pulse"));
        }
        Ok(EdgeSchedule { edges, pulse_width })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn pulse_width(&self) -> Nanos {
        self.pulse_width
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn rising_times(&self) -> impl Iterator<Item = Nanos> + '_ {
        self.edges
            .iter()
            .filter(|e| e.direction == EdgeDirection::Rising)
            .map(|e| e.t)
    }

    /// Gaps between consecutive rising edges.
    pub fn intervals(&self) -> Vec<Nanos> {
        let r: Vec<Nanos> = self.rising_times().collect();
        r.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `(first edge, last edge)`, or `None` for an empty schedule.
    pub fn span(&self) -> Option<(Nanos, Nanos)> {
        Some((self.edges.first()?.t, self.edges.last()?.t))
    }

    /// CSV with header `t_us,direction`, direction `R` or `F`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.edges.len() + 1));
        out.push_str("t_us,direction\n");
        for e in &self.edges {
            let d = match e.direction {
                EdgeDirection::Rising => 'R',
                EdgeDirection::Falling => 'F',
            };
            let _ = writeln!(out, "{},{d}", format_us(e.t));
        }
        out
    }

    /// Reads the CSV written by [`EdgeSchedule::to_csv`]. The pulse width is
    /// taken from the first pulse.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut edges = Vec::new();
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "t_us,direction" {
            return Err(Error::parse(1, "expected header `t_us,direction`"));
        }
        for (i, line) in lines.enumerate() {
            let line = line?;
            let n = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (t, d) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(n, "expected `t_us,direction`"))?;
            let t = parse_us(t).ok_or_else(|| Error::parse(n, format!("bad time `{t}`")))?;
            let direction = match d.trim() {
                "R" => EdgeDirection::Rising,
                "F" => EdgeDirection::Falling,
                other => return Err(Error::parse(n, format!("bad direction `{other}`"))),
            };
            edges.push(Edge { t, direction });
        }
        if edges.len() < 2 {
            return Err(Error::parse(0, "schedule has no complete pulse"));
        }
        let pulse_width = edges[1].t - edges[0].t;
        EdgeSchedule::new(edges, pulse_width)
    }
}

/// Output of [`encode`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Encoded {
    /// Interval per symbol.
    pub intervals: Vec<Nanos>,
    /// 0-based alphabet index per symbol.
    pub symbols: Vec<usize>,
    /// Codeword (payload value) per block.
    pub codewords: Vec<usize>,
    /// Zero bits appended to complete the last block.
    pub padded_bits: usize,
}

/// Maps each `L`-bit group (most significant bit first) to its codeword and
/// concatenates the codewords' intervals. A trailing partial group is
/// zero-padded.
pub fn encode(bits: &[bool], codebook: &Codebook) -> Encoded {
    let l = codebook.payload_bits();
    let alphabet = codebook.alphabet();
    let blocks = bits.len().div_ceil(l);
    let padded_bits = blocks * l - bits.len();
    let mut out = Encoded {
        intervals: Vec::with_capacity(blocks * codebook.block_length()),
        symbols: Vec::with_capacity(blocks * codebook.block_length()),
        codewords: Vec::with_capacity(blocks),
        padded_bits,
    };
    for b in 0..blocks {
        let value = (0..l).fold(0usize, |acc, j| {
            let bit = bits.get(b * l + j).copied().unwrap_or(false);
            (acc << 1) | bit as usize
        });
        out.codewords.push(value);
        for &s in codebook.codeword(value).symbols {
            out.symbols.push(s as usize);
            out.intervals.push(alphabet.interval(s as usize));
        }
    }
    out
}

/// Expands a codeword value into `l` bits, most significant first.
pub fn value_bits(value: usize, l: usize, out: &mut Vec<bool>) {
    for j in (0..l).rev() {
        out.push((value >> j) & 1 == 1);
    }
}

/// Builds the edge schedule: rising edges at `t0` and at every cumulative
/// interval sum, one terminating pulse after the last interval, and a
/// falling edge `pulse_width` after each rising edge.
pub fn to_edge_schedule(
    intervals: &[Nanos],
    pulse_width: Nanos,
    t0: Nanos,
) -> Result<EdgeSchedule> {
    if t0 < 0 {
        return Err(Error::invalid("t0 must be nonnegative"));
    }
    if pulse_width <= 0 {
        return Err(Error::invalid("pulse width must be positive"));
    }
    if let Some(&min) = intervals.iter().min() {
        if pulse_width >= min {
            return Err(Error::invalid(format!(
                "pulse width {pulse_width} ns must be shorter than the shortest interval {min} ns"
            )));
        }
    }
    let mut edges = Vec::with_capacity(2 * (intervals.len() + 1));
    let mut t = t0;
    edges.push(Edge {
        t,
        direction: EdgeDirection::Rising,
    });
    edges.push(Edge {
        t: t + pulse_width,
        direction: EdgeDirection::Falling,
    });
    for &tau in intervals {
        t += tau;
        edges.push(Edge {
            t,
            direction: EdgeDirection::Rising,
        });
        edges.push(Edge {
            t: t + pulse_width,
            direction: EdgeDirection::Falling,
        });
    }
    Ok(EdgeSchedule { edges, pulse_width })
}

/// Default transmit pulse width: half the shortest interval.
pub fn default_pulse_width(codebook: &Codebook) -> Nanos {
    (codebook.alphabet().shortest() / 2).max(1)
}
