//! Flat `key = value` experiment configuration.
//!
//! Durations are given in microseconds (`*_us` keys). `#` starts a comment.
//! Every key except `tr_us`, `td_us` and `m` has a default; those three come
//! from a preset or must be set explicitly.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use eim_core::codebook::{DEFAULT_EPSILON, DEFAULT_N_MAX};
use eim_core::units::{parse_us, us, Nanos};
use eim_core::{build_alphabet, ChannelConfig, DemodConfig, SymbolAlphabet};

/// Table presets for the short- and long-range designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Modulation1,
    Modulation2,
}

impl Preset {
    fn apply(self, cfg: &mut ExperimentConfig) {
        let (tr, td, m) = match self {
            Preset::Modulation1 => (32, 26, 4),
            Preset::Modulation2 => (160, 60, 6),
        };
        cfg.tr = Some(us(tr));
        cfg.td = Some(us(td));
        cfg.m = Some(m);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tr: Option<Nanos>,
    pub td: Option<Nanos>,
    pub m: Option<usize>,
    pub n_max: usize,
    pub epsilon: f64,
    pub channel: ChannelConfig,
    pub bin_width: Option<Nanos>,
    pub smooth_window: usize,
    pub neg_threshold: f64,
    pub pos_threshold: f64,
    pub pulse_width: Option<Nanos>,
    pub n_symbols: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let demod = DemodConfig::default();
        ExperimentConfig {
            tr: None,
            td: None,
            m: None,
            n_max: DEFAULT_N_MAX,
            epsilon: DEFAULT_EPSILON,
            channel: ChannelConfig::default(),
            bin_width: None,
            smooth_window: demod.smooth_window,
            neg_threshold: demod.neg_threshold,
            pos_threshold: demod.pos_threshold,
            pulse_width: None,
            n_symbols: 100_000,
            seed: 0,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Keys accepted in a config file, with their defaults, for `--help`.
pub const KEYS_HELP: &str = "\
Config keys (flat `key = value`, durations in microseconds):
  tr_us, td_us, m            ladder base, step and size (required unless --preset)
  n_max = 10                 exclusive bound of the block-length search
  epsilon = 0.02             relative bit-rate tolerance when choosing M
  pixel_count = 32           channel: pixels imaging the LED
  events_per_edge = 3        channel: mean events per pixel per edge
  burst_decay_us = 3         channel: exponential spread of a burst
  jitter_sigma_us = 2        channel: Gaussian per-event jitter
  refractory_us = 5          channel: per-pixel refractory period
  lowpass_tau_us = 8         channel: edge response recovery constant
  noise_rate = 100           channel: background events/s per polarity
  deterministic_counts = false
  bin_width_us = max(1, td_us/8)
  smooth_window = 3          moving-average width in bins (odd)
  neg_threshold = 1.0
  pos_threshold = 1.0
  pulse_width_us = tr_us/2
  n_symbols = 100000
  seed = 0
  out_dir = .";

fn parse_duration(key: &str, v: &str) -> Result<Nanos> {
    parse_us(v)
        .ok_or_else(|| anyhow!("`{key}` expects microseconds with at most 3 decimals, got `{v}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| anyhow!("`{key}`: cannot parse `{v}`: {e}"))
}

impl ExperimentConfig {
    pub fn from_preset(preset: Option<Preset>) -> Self {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = preset {
            p.apply(&mut cfg);
        }
        cfg
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "tr_us" => self.tr = Some(parse_duration(key, v)?),
            "td_us" => self.td = Some(parse_duration(key, v)?),
            "m" => self.m = Some(parse_num(key, v)?),
            "n_max" => self.n_max = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_num(key, v)?,
            "pixel_count" => self.channel.pixel_count = parse_num(key, v)?,
            "events_per_edge" => self.channel.events_per_edge = parse_num(key, v)?,
            "burst_decay_us" => self.channel.burst_decay = parse_duration(key, v)?,
            "jitter_sigma_us" => self.channel.jitter_sigma = parse_duration(key, v)?,
            "refractory_us" => self.channel.refractory = parse_duration(key, v)?,
            "lowpass_tau_us" => self.channel.lowpass_tau = parse_duration(key, v)?,
            "noise_rate" => self.channel.noise_rate = parse_num(key, v)?,
            "deterministic_counts" => self.channel.deterministic_counts = parse_num(key, v)?,
            "bin_width_us" => self.bin_width = Some(parse_duration(key, v)?),
            "smooth_window" => self.smooth_window = parse_num(key, v)?,
            "neg_threshold" => self.neg_threshold = parse_num(key, v)?,
            "pos_threshold" => self.pos_threshold = parse_num(key, v)?,
            "pulse_width_us" => self.pulse_width = Some(parse_duration(key, v)?),
            "n_symbols" => self.n_symbols = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Result<SymbolAlphabet> {
        let (Some(tr), Some(td), Some(m)) = (self.tr, self.td, self.m) else {
            bail!("tr_us, td_us and m must be set (use --preset or a config file)");
        };
        Ok(build_alphabet(tr, td, m)?)
    }

    pub fn demod(&self, alphabet: &SymbolAlphabet) -> DemodConfig {
        let mut d = DemodConfig::for_alphabet(alphabet);
        if let Some(b) = self.bin_width {
            d.bin_width = b;
        }
        d.smooth_window = self.smooth_window;
        d.neg_threshold = self.neg_threshold;
        d.pos_threshold = self.pos_threshold;
        d
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            seed: self.seed,
            ..self.channel.clone()
        }
    }
}
