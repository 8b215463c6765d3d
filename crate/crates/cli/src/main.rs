mod config;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, Preset, KEYS_HELP};
use eim_core::calibration::{DEFAULT_PERIOD_TOLERANCE, DEFAULT_STABILITY, DEFAULT_TD_MARGIN};
use eim_core::demodulator::{bits_to_hex, hex_to_bits};
use eim_core::experiment::{run_experiment_detailed, SweepTable};
use eim_core::modulator::default_pulse_width;
use eim_core::units::{format_us, us_f64, Nanos};
use eim_core::{
    bitrate_general, demodulate, encode, estimate_td, estimate_tr, frequency_response, simulate,
    sweep, sweep_m, to_edge_schedule, Codebook, EdgeSchedule, EventStream, SweepParam,
};

#[derive(Parser)]
#[command(name = "eim", version, about = "Event interval modulation link tools", after_help = KEYS_HELP)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` config file, applied on top of --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the codebook and report N*, L and the bit rate.
    Design {
        /// Also tabulate every M in `lo..=hi` and apply the preference rule.
        #[arg(long, value_name = "LO..=HI", value_parser = parse_m_range)]
        sweep_m: Option<(usize, usize)>,
    },
    /// Encode payload bits into a transmitter edge schedule (schedule.csv).
    Modulate {
        /// Payload as hexadecimal, most significant bit first.
        #[arg(long, conflicts_with_all = ["binary", "input"])]
        hex: Option<String>,
        /// Payload as a string of 0/1 characters.
        #[arg(long, conflicts_with = "input")]
        binary: Option<String>,
        /// File holding a hex payload (whitespace ignored).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Simulate the sensor for an edge schedule (events.csv).
    Simulate {
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Recover bits (bits.hex) and diagnostics (diagnostics.json) from events.
    Demodulate {
        #[arg(long)]
        events: PathBuf,
        /// Codebook text file; built from the config when omitted.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// End-to-end error-rate run (report.json).
    Run,
    /// Sweep one channel parameter (sweep_<param>.csv).
    Sweep {
        /// jitter_sigma (µs), noise_rate (1/s), lowpass_tau (µs) or frequency (Hz).
        param: SweepParam,
        /// Comma-separated values or `start:stop:step`.
        #[arg(long, value_parser = parse_values)]
        values: Values,
    },
    /// Estimate ladder parameters from the channel.
    Calibrate {
        #[command(subcommand)]
        target: CalibrateTarget,
    },
}

#[derive(Subcommand)]
enum CalibrateTarget {
    /// Shortest stably timed square-wave period (calibrate_tr.json).
    Tr {
        /// Candidate periods in µs, comma-separated or `start:stop:step`.
        #[arg(long, value_parser = parse_values, default_value = "10:100:2")]
        periods_us: Values,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_STABILITY)]
        stability: f64,
        #[arg(long, default_value_t = DEFAULT_PERIOD_TOLERANCE)]
        tolerance: f64,
    },
    /// Interval spread for a repeated probe (histogram.csv, calibrate_td.json).
    Td {
        /// Probe interval in µs; defaults to tr_us + td_us.
        #[arg(long)]
        probe_us: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_TD_MARGIN)]
        margin: f64,
    },
}

#[derive(Clone, Debug)]
struct Values(Vec<f64>);

fn parse_values(s: &str) -> Result<Values, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    let v = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err("range needs start <= stop and a positive step".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err("expected `a,b,c` or `start:stop:step`".into()),
    };
    if v.is_empty() {
        return Err("no values".into());
    }
    Ok(Values(v))
}

fn parse_m_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..=")
        .or_else(|| s.split_once('-'))
        .ok_or("expected `LO..=HI`")?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo < 2 || hi < lo {
        return Err("need 2 <= LO <= HI".into());
    }
    Ok((lo, hi))
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_preset(g.preset);
    if let Some(path) = &g.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)
            .with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn codebook_from(cfg: &ExperimentConfig) -> Result<Codebook> {
    Ok(Codebook::design(&cfg.alphabet()?, cfg.n_max)?)
}

fn read_payload(
    hex: Option<String>,
    binary: Option<String>,
    input: Option<PathBuf>,
) -> Result<Vec<bool>> {
    if let Some(b) = binary {
        return b
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(anyhow!("binary payload contains `{other}`")),
            })
            .collect();
    }
    let hex = match (hex, input) {
        (Some(h), _) => h,
        (None, Some(p)) => {
            fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?
        }
        (None, None) => bail!("one of --hex, --binary or --input is required"),
    };
    let compact: String = hex.chars().filter(|c| !c.is_whitespace()).collect();
    Ok(hex_to_bits(&compact)?)
}

fn execute(cli: Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli.global)?;
    let out = cfg.out_dir.clone();

    match cli.command {
        Command::Design { sweep_m: range } => {
            let cb = codebook_from(&cfg)?;
            let a = cb.alphabet();
            let path = write_out(&out, "codebook.txt", &cb.to_text()?)?;
            let mut summary = json!({
                "tr_us": format_us(a.tr()),
                "td_us": format_us(a.td()),
                "m": a.len(),
                "n_star": cb.block_length(),
                "l": cb.payload_bits(),
                "bitrate_bps": bitrate_general(&cb),
                "codebook": path,
            });
            if let Some((lo, hi)) = range {
                let s = sweep_m(a.tr(), a.td(), lo..=hi, cfg.n_max, cfg.epsilon)?;
                let mut csv = String::from("m,n_star,l,bitrate_bps\n");
                for p in &s.points {
                    csv.push_str(&format!(
                        "{},{},{},{:.4}\n",
                        p.m, p.n_star, p.l, p.bitrate_bps
                    ));
                }
                let p = write_out(&out, "m_sweep.csv", &csv)?;
                summary["m_sweep"] = json!({
                    "argmax_m": s.argmax_m,
                    "selected_m": s.selected_m,
                    "epsilon": s.epsilon,
                    "table": p,
                });
            }
            Ok(summary)
        }
        Command::Modulate { hex, binary, input } => {
            let cb = codebook_from(&cfg)?;
            let bits = read_payload(hex, binary, input)?;
            let enc = encode(&bits, &cb);
            if enc.padded_bits > 0 {
                eprintln!(
                    "warning: padded the last block with {} zero bits",
                    enc.padded_bits
                );
            }
            let pw = cfg.pulse_width.unwrap_or_else(|| default_pulse_width(&cb));
            let schedule = to_edge_schedule(&enc.intervals, pw, 0)?;
            let path = write_out(&out, "schedule.csv", &schedule.to_csv())?;
            let (_, end) = schedule.span().unwrap_or((0, 0));
            Ok(json!({
                "bits": bits.len(),
                "blocks": enc.codewords.len(),
                "symbols": enc.symbols.len(),
                "padded_bits": enc.padded_bits,
                "duration_us": format_us(end),
                "schedule": path,
            }))
        }
        Command::Simulate { schedule } => {
            let f = fs::File::open(&schedule)
                .with_context(|| format!("opening {}", schedule.display()))?;
            let s = EdgeSchedule::read_csv(BufReader::new(f))
                .with_context(|| format!("reading {}", schedule.display()))?;
            let stream = simulate(&s, &cfg.channel())?;
            let path = write_out(&out, "events.csv", &stream.to_csv())?;
            Ok(json!({ "edges": s.edges().len(), "events": stream.len(), "output": path }))
        }
        Command::Demodulate { events, codebook } => {
            let cb = match codebook {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    Codebook::from_text(&text)
                        .with_context(|| format!("loading {}", p.display()))?
                }
                None => codebook_from(&cfg)?,
            };
            let f =
                fs::File::open(&events).with_context(|| format!("opening {}", events.display()))?;
            let stream = EventStream::read_csv(BufReader::new(f))
                .with_context(|| format!("reading {}", events.display()))?;
            let rx = demodulate(&stream, &cb, &cfg.demod(cb.alphabet()))?;
            let d = rx.diagnostics;
            if d.nearest_match_corrections > 0 || d.low_confidence > 0 {
                eprintln!(
                    "warning: {} block(s) corrected to the nearest codeword, {} interval(s) outside the ladder",
                    d.nearest_match_corrections, d.low_confidence
                );
            }
            let bits_path = write_out(&out, "bits.hex", &format!("{}\n", bits_to_hex(&rx.bits)))?;
            let diag_path =
                write_out(&out, "diagnostics.json", &serde_json::to_string_pretty(&d)?)?;
            Ok(json!({
                "bits": rx.bits.len(),
                "symbols": rx.symbols.len(),
                "diagnostics": d,
                "output": bits_path,
                "diagnostics_file": diag_path,
            }))
        }
        Command::Run => {
            let cb = codebook_from(&cfg)?;
            let o = run_experiment_detailed(
                &cb,
                &cfg.channel,
                &cfg.demod(cb.alphabet()),
                cfg.n_symbols,
                cfg.seed,
            )?;
            let report = json!({
                "seed": cfg.seed,
                "n_star": cb.block_length(),
                "l": cb.payload_bits(),
                "bitrate_bps": bitrate_general(&cb),
                "report": o.report,
                "diagnostics": o.diagnostics,
            });
            let path = write_out(&out, "report.json", &serde_json::to_string_pretty(&report)?)?;
            Ok(
                json!({ "ser": o.report.ser, "ber": o.report.ber, "symbols": o.report.symbols_sent, "output": path }),
            )
        }
        Command::Sweep { param, values } => {
            // The frequency response needs no ladder, so it skips the codebook.
            let table = if param == SweepParam::Frequency {
                SweepTable::Frequency(frequency_response(
                    &cfg.channel(),
                    &values.0,
                    cfg.n_symbols,
                )?)
            } else {
                let cb = codebook_from(&cfg)?;
                sweep(
                    param,
                    &values.0,
                    &cb,
                    &cfg.channel,
                    &cfg.demod(cb.alphabet()),
                    cfg.n_symbols,
                    cfg.seed,
                )?
            };
            let path = write_out(
                &out,
                &format!("sweep_{}.csv", param.name()),
                &table.to_csv(),
            )?;
            let rows = match &table {
                SweepTable::ErrorRate(r) => r.len(),
                SweepTable::Frequency(p) => p.len(),
            };
            Ok(json!({ "param": param.name(), "rows": rows, "output": path }))
        }
        Command::Calibrate { target } => {
            let alphabet = cfg.alphabet().ok();
            let demod = match &alphabet {
                Some(a) => cfg.demod(a),
                None => {
                    let mut d = eim_core::DemodConfig::default();
                    if let Some(b) = cfg.bin_width {
                        d.bin_width = b;
                    }
                    d
                }
            };
            let channel = cfg.channel();
            match target {
                CalibrateTarget::Tr {
                    periods_us,
                    trials,
                    stability,
                    tolerance,
                } => {
                    let periods: Vec<Nanos> = periods_us.0.iter().map(|&p| us_f64(p)).collect();
                    let est =
                        estimate_tr(&channel, &demod, &periods, trials, stability, tolerance)?;
                    let path = write_out(
                        &out,
                        "calibrate_tr.json",
                        &serde_json::to_string_pretty(&est)?,
                    )?;
                    let tr = est.tr()?;
                    Ok(json!({ "tr_us": format_us(tr), "output": path }))
                }
                CalibrateTarget::Td {
                    probe_us,
                    trials,
                    margin,
                } => {
                    let probe = match (probe_us, &alphabet) {
                        (Some(p), _) => us_f64(p),
                        (None, Some(a)) => a.tr() + a.td(),
                        (None, None) => bail!("--probe-us is required without a configured ladder"),
                    };
                    let est = estimate_td(&channel, &demod, probe, trials, margin)?;
                    let hist = write_out(&out, "histogram.csv", &est.histogram.to_csv())?;
                    let summary = json!({
                        "probe_us": format_us(probe),
                        "t_lower_us": format_us(est.histogram.lower),
                        "t_upper_us": format_us(est.histogram.upper),
                        "spread_us": format_us(est.histogram.spread()),
                        "td_us": format_us(est.td),
                    });
                    write_out(
                        &out,
                        "calibrate_td.json",
                        &serde_json::to_string_pretty(&summary)?,
                    )?;
                    Ok(json!({ "td_us": format_us(est.td), "histogram": hist, "summary": summary }))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
