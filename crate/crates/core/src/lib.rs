//! Event interval modulation (EIM) for event-based optical camera
//! communication.
//!
//! Data is carried by the time between successive rising light edges. A
//! transmitter blinks an LED so that the gap between two pulses is one of `M`
//! allowed intervals; an event-based vision sensor observes the bursts of
//! positive and negative events each edge produces, and the receiver recovers
//! the intervals from the timing of the positive bursts.
//!
//! The crate is organised along the link:
//!
//! - [`codebook`]: interval ladders, block-length optimisation, codeword
//!   selection and bit rates.
//! - [`modulator`]: payload bits to intervals and transmitter edge schedules.
//! - [`channel`]: a phenomenological event-sensor simulator.
//! - [`demodulator`]: binning, smoothing, peak timing and symbol decisions.
//! - [`calibration`]: estimation of the ladder base and step against a channel.
//! - [`experiment`]: symbol/bit error rate measurement and parameter sweeps.
//!
//! All times are integer nanoseconds ([`Nanos`]).

pub mod calibration;
pub mod channel;
pub mod codebook;
pub mod demodulator;
mod error;
pub mod experiment;
pub mod modulator;
pub mod rng;
pub mod units;

pub use calibration::{estimate_td, estimate_tr, IntervalHistogram, TdEstimate, TrEstimate};
pub use channel::{
    frequency_response, simulate, simulate_window, ChannelConfig, Event, EventStream,
    FrequencyPoint, Polarity,
};
pub use codebook::{
    bitrate_general, bitrate_uniform, build_alphabet, optimal_block_length, payload_bits,
    select_codewords, sweep_m, Codebook, DesignPoint, MSweep, SymbolAlphabet,
};
pub use demodulator::{
    bin_and_smooth, decide_bits, demodulate, detect_peaks, peak_intervals, quantize_interval,
    DemodConfig, Demodulated, Diagnostics, PeakTimes, SampledSignals,
};
pub use error::{Error, Result};
pub use experiment::{measure_ser, run_experiment, sweep, SerReport, SweepParam, SweepRow};
pub use modulator::{encode, to_edge_schedule, Edge, EdgeDirection, EdgeSchedule, Encoded};
pub use units::Nanos;
