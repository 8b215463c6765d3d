//! Phenomenological event-sensor channel.
//!
//! Each light edge makes every pixel looking at the LED fire a short burst of
//! events with the edge's polarity. The model keeps only what the receiver
//! depends on:
//!
//! - burst size: Poisson with mean `λ·s` per pixel, where
//!   `s = 1 − exp(−Δt/τ_rc)` shrinks the response when the previous opposite
//!   edge was recent (finite pixel bandwidth),
//! - burst timing: exponential spread `τ_b` plus Gaussian jitter `σ_t`,
//!   never earlier than the edge,
//! - a per-pixel refractory period `ρ`,
//! - background events at rate `ν` per polarity.
//!
//! Randomness for edge `e` and pixel `p` comes from the substream
//! `(seed, e, p)`, so output is identical however pixels are scheduled.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::modulator::{EdgeDirection, EdgeSchedule};
use crate::rng::substream;
use crate::units::{format_us, parse_us, to_seconds, us, Nanos, NS_PER_S};
use crate::{Error, Result};

const NOISE_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

impl From<EdgeDirection> for Polarity {
    fn from(d: EdgeDirection) -> Self {
        match d {
            EdgeDirection::Rising => Polarity::Positive,
            EdgeDirection::Falling => Polarity::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Event {
    pub t: Nanos,
    pub polarity: Polarity,
}

/// Time-ordered sensor output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    /// Fails unless timestamps are nondecreasing.
    pub fn new(events: Vec<Event>) -> Result<Self> {
        if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::invalid(format!("event {} goes back in time", i + 1)));
        }
        Ok(EventStream { events })
    }

    /// Sorts `events` by time (then polarity).
    pub fn from_unsorted(mut events: Vec<Event>) -> Self {
        events.sort_unstable();
        EventStream { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, polarity: Polarity) -> usize {
        self.events
            .iter()
            .filter(|e| e.polarity == polarity)
            .count()
    }

    /// Every timestamp moved by `dt`.
    pub fn shifted(&self, dt: Nanos) -> Self {
        EventStream {
            events: self
                .events
                .iter()
                .map(|e| Event {
                    t: e.t + dt,
                    polarity: e.polarity,
                })
                .collect(),
        }
    }

    /// CSV with header `t_us,polarity,count`; equal consecutive events are
    /// aggregated into one row.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(20 * self.events.len() / 2 + 32);
        out.push_str("t_us,polarity,count\n");
        let mut i = 0;
        while i < self.events.len() {
            let e = self.events[i];
            let run = self.events[i..].iter().take_while(|x| **x == e).count();
            let _ = writeln!(out, "{},{},{run}", format_us(e.t), e.polarity.sign());
            i += run;
        }
        out
    }

    /// Reads aggregated or unaggregated rows.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "t_us,polarity,count" {
            return Err(Error::parse(1, "expected header `t_us,polarity,count`"));
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let n = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split(',');
            let (Some(t), Some(p), Some(c), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(Error::parse(n, "expected `t_us,polarity,count`"));
            };
            let t = parse_us(t).ok_or_else(|| Error::parse(n, format!("bad time `{t}`")))?;
            let polarity = match p.trim() {
                "1" | "+1" => Polarity::Positive,
                "-1" => Polarity::Negative,
                other => return Err(Error::parse(n, format!("bad polarity `{other}`"))),
            };
            let count: usize = c
                .trim()
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::parse(n, format!("bad count `{}`", c.trim())))?;
            if events.last().is_some_and(|e: &Event| e.t > t) {
                return Err(Error::parse(n, "timestamps must be nondecreasing"));
            }
            events.extend(std::iter::repeat_n(Event { t, polarity }, count));
        }
        Ok(EventStream { events })
    }
}

/// Channel parameters. Durations in nanoseconds, `noise_rate` in events per
/// second per polarity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelConfig {
    /// Pixels imaging the LED (`K`).
    pub pixel_count: usize,
    /// Mean events per pixel per fully developed edge (`λ`).
    pub events_per_edge: f64,
    /// Mean exponential delay of events within a burst (`τ_b`).
    pub burst_decay: Nanos,
    /// Standard deviation of per-event Gaussian timing jitter (`σ_t`).
    pub jitter_sigma: Nanos,
    /// Minimum time between two events of one pixel (`ρ`).
    pub refractory: Nanos,
    /// Recovery constant of the edge response (`τ_rc`).
    pub lowpass_tau: Nanos,
    /// Background event rate per polarity (`ν`).
    pub noise_rate: f64,
    pub seed: u64,
    /// Replace Poisson draws by `round(λ·s)`.
    pub deterministic_counts: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            pixel_count: 32,
            events_per_edge: 3.0,
            burst_decay: us(3),
            jitter_sigma: us(2),
            refractory: us(5),
            lowpass_tau: us(8),
            noise_rate: 100.0,
            seed: 0,
            deterministic_counts: false,
        }
    }
}

impl ChannelConfig {
    /// A channel that reproduces every edge as exactly `round(λ)` events at
    /// the edge time, with no noise.
    pub fn noiseless() -> Self {
        ChannelConfig {
            burst_decay: 0,
            jitter_sigma: 0,
            refractory: 0,
            lowpass_tau: 0,
            noise_rate: 0.0,
            deterministic_counts: true,
            ..ChannelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixel_count < 1 {
            return Err(Error::invalid("pixel_count must be at least 1"));
        }
        if !(self.events_per_edge.is_finite() && self.events_per_edge >= 0.0) {
            return Err(Error::invalid(
                "events_per_edge must be finite and nonnegative",
            ));
        }
        if !(self.noise_rate.is_finite() && self.noise_rate >= 0.0) {
            return Err(Error::invalid("noise_rate must be finite and nonnegative"));
        }
        for (name, v) in [
            ("burst_decay", self.burst_decay),
            ("jitter_sigma", self.jitter_sigma),
            ("refractory", self.refractory),
            ("lowpass_tau", self.lowpass_tau),
        ] {
            if v < 0 {
                return Err(Error::invalid(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Response scale of an edge that follows the previous opposite edge by
    /// `dt`.
    pub fn amplitude(&self, dt: Option<Nanos>) -> f64 {
        match dt {
            Some(dt) if self.lowpass_tau > 0 => {
                1.0 - (-(dt as f64) / self.lowpass_tau as f64).exp()
            }
            _ => 1.0,
        }
    }
}

/// Bookkeeping from one simulation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimulationStats {
    /// Events drawn for edges before the refractory filter.
    pub drawn: usize,
    /// Edge events removed by the refractory filter.
    pub refractory_dropped: usize,
    /// Background events added.
    pub noise: usize,
}

enum Count {
    Zero,
    Exact(usize),
    Poisson(Poisson<f64>),
}

impl Count {
    fn new(mean: f64, deterministic: bool) -> Self {
        if deterministic {
            match mean.round() as usize {
                0 => Count::Zero,
                n => Count::Exact(n),
            }
        } else if mean > 0.0 {
            Count::Poisson(Poisson::new(mean).expect("positive finite mean"))
        } else {
            Count::Zero
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            Count::Zero => 0,
            Count::Exact(n) => *n,
            Count::Poisson(p) => p.sample(rng) as usize,
        }
    }
}

/// Simulates the sensor over the schedule's own span (first to last edge).
pub fn simulate(schedule: &EdgeSchedule, config: &ChannelConfig) -> Result<EventStream> {
    match schedule.span() {
        Some((start, end)) => simulate_window(schedule, config, start, end),
        None => {
            config.validate()?;
            Ok(EventStream::default())
        }
    }
}

/// Simulates the sensor, adding background events over `[start, end]`.
pub fn simulate_window(
    schedule: &EdgeSchedule,
    config: &ChannelConfig,
    start: Nanos,
    end: Nanos,
) -> Result<EventStream> {
    simulate_with_stats(schedule, config, start, end).map(|(s, _)| s)
}

pub fn simulate_with_stats(
    schedule: &EdgeSchedule,
    config: &ChannelConfig,
    start: Nanos,
    end: Nanos,
) -> Result<(EventStream, SimulationStats)> {
    config.validate()?;
    if end < start {
        return Err(Error::invalid("noise window ends before it starts"));
    }
    let edges = schedule.edges();
    let counts: Vec<Count> = edges
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let dt = (i > 0).then(|| edges[i].t - edges[i - 1].t);
            Count::new(
                config.events_per_edge * config.amplitude(dt),
                config.deterministic_counts,
            )
        })
        .collect();
    let spread =
        (config.burst_decay > 0).then(|| Exp::new(1.0 / config.burst_decay as f64).unwrap());
    let jitter =
        (config.jitter_sigma > 0).then(|| Normal::new(0.0, config.jitter_sigma as f64).unwrap());

    let per_pixel: Vec<(Vec<Event>, usize, usize)> = (0..config.pixel_count)
        .into_par_iter()
        .map(|p| {
            let mut trace = Vec::new();
            for (e, edge) in edges.iter().enumerate() {
                if matches!(counts[e], Count::Zero) {
                    continue;
                }
                let mut rng = substream(config.seed, e as u64, p as u64);
                let n = counts[e].draw(&mut rng);
                let polarity = Polarity::from(edge.direction);
                for _ in 0..n {
                    let mut dt = 0.0;
                    if let Some(d) = &spread {
                        dt += d.sample(&mut rng);
                    }
                    if let Some(j) = &jitter {
                        dt += j.sample(&mut rng);
                    }
                    let t = edge.t + (dt.round() as Nanos).max(0);
                    trace.push(Event { t, polarity });
                }
            }
            let drawn = trace.len();
            trace.sort_unstable();
            if config.refractory > 0 {
                let mut last: Option<Nanos> = None;
                trace.retain(|ev| match last {
                    Some(l) if ev.t - l < config.refractory => false,
                    _ => {
                        last = Some(ev.t);
                        true
                    }
                });
            }
            let kept = trace.len();
            (trace, drawn, drawn - kept)
        })
        .collect();

    let mut stats = SimulationStats::default();
    let mut events: Vec<Event> = Vec::with_capacity(per_pixel.iter().map(|x| x.0.len()).sum());
    for (trace, drawn, dropped) in per_pixel {
        stats.drawn += drawn;
        stats.refractory_dropped += dropped;
        events.extend(trace);
    }

    if config.noise_rate > 0.0 && end > start {
        let mean = config.noise_rate * to_seconds(end - start);
        for polarity in [Polarity::Positive, Polarity::Negative] {
            let mut rng = substream(config.seed, NOISE_STREAM, polarity as u64);
            let n = Count::new(mean, false).draw(&mut rng);
            stats.noise += n;
            events.extend((0..n).map(|_| Event {
                t: rng.random_range(start..=end),
                polarity,
            }));
        }
    }

    Ok((EventStream::from_unsorted(events), stats))
}

/// Mean events per edge observed for a 50% duty square wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub freq_hz: f64,
    pub positive_per_edge: f64,
    pub negative_per_edge: f64,
}

/// Square wave with `cycles` periods of length `period` and 50% duty.
pub fn square_wave(period: Nanos, cycles: usize) -> Result<EdgeSchedule> {
    if period < 2 {
        return Err(Error::invalid("square-wave period must be at least 2 ns"));
    }
    if cycles == 0 {
        return Err(Error::invalid("square wave needs at least one cycle"));
    }
    let intervals = vec![period; cycles - 1];
    crate::modulator::to_edge_schedule(&intervals, period / 2, 0)
}

/// Drives a square wave at each frequency through [`simulate`] and reports
/// per-edge mean event counts.
pub fn frequency_response(
    config: &ChannelConfig,
    freqs: &[f64],
    cycles: usize,
) -> Result<Vec<FrequencyPoint>> {
    freqs
        .par_iter()
        .map(|&f| {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid(format!(
                    "frequency must be positive, got {f}"
                )));
            }
            let period = (NS_PER_S as f64 / f).round() as Nanos;
            let schedule = square_wave(period, cycles)?;
            let stream = simulate(&schedule, config)?;
            Ok(FrequencyPoint {
                freq_hz: f,
                positive_per_edge: stream.count(Polarity::Positive) as f64 / cycles as f64,
                negative_per_edge: stream.count(Polarity::Negative) as f64 / cycles as f64,
            })
        })
        .collect()
}
