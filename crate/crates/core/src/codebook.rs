//! Interval ladders, block-length optimisation and codeword selection.
//!
//! A symbol alphabet is a strictly increasing list of `M` intervals. When `M`
//! is not a power of two, `N` consecutive intervals are combined into one
//! block so that the wasted fraction of `N·log2 M` bits is as small as
//! possible. Of the `M^N` possible blocks, the `2^L` with the shortest total
//! duration become codewords; each carries `L = floor(N·log2 M)` bits.
//!
//! Codewords are ordered by `(duration, lexicographic tuple)` and the position
//! of a codeword in that order is its payload value.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::units::{to_seconds, Nanos};
use crate::{Error, Result};

/// Upper bound on `M^N*` for codeword enumeration.
pub const DEFAULT_TUPLE_CAP: u128 = 100_000_000;

/// Default exclusive upper bound of the block-length search.
pub const DEFAULT_N_MAX: usize = 10;

/// Default relative tolerance under which two bit rates count as equivalent
/// when choosing `M`.
pub const DEFAULT_EPSILON: f64 = 0.02;

const FRAC_EPS: f64 = 1e-12;

/// The set of intervals a symbol may take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolAlphabet {
    tr: Nanos,
    td: Nanos,
    intervals: Vec<Nanos>,
    uniform: bool,
}

impl SymbolAlphabet {
    /// The uniform ladder `tr, tr + td, ..., tr + (m-1)·td`.
    pub fn uniform(tr: Nanos, td: Nanos, m: usize) -> Result<Self> {
        if tr <= 0 {
            return Err(Error::invalid(format!("T_r must be positive, got {tr} ns")));
        }
        if td <= 0 {
            return Err(Error::invalid(format!("T_d must be positive, got {td} ns")));
        }
        if m < 2 {
            return Err(Error::invalid(format!("M must be at least 2, got {m}")));
        }
        if m > u16::MAX as usize + 1 {
            return Err(Error::invalid(format!("M = {m} is too large")));
        }
        let intervals = (0..m as i64)
            .map(|i| {
                i.checked_mul(td)
                    .and_then(|x| x.checked_add(tr))
                    .ok_or_else(|| Error::invalid("interval ladder overflows"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolAlphabet {
            tr,
            td,
            intervals,
            uniform: true,
        })
    }

    /// An arbitrary strictly increasing interval list. `tr()` reports the
    /// shortest interval and `td()` the smallest step between neighbours.
    pub fn from_intervals(intervals: Vec<Nanos>) -> Result<Self> {
        if intervals.len() < 2 {
            return Err(Error::invalid("an alphabet needs at least two intervals"));
        }
        if intervals.len() > u16::MAX as usize + 1 {
            return Err(Error::invalid("too many intervals"));
        }
        if intervals[0] <= 0 {
            return Err(Error::invalid("intervals must be positive"));
        }
        if intervals.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("intervals must be strictly increasing"));
        }
        let td = intervals.windows(2).map(|w| w[1] - w[0]).min().unwrap();
        let uniform = intervals.windows(2).all(|w| w[1] - w[0] == td);
        Ok(SymbolAlphabet {
            tr: intervals[0],
            td,
            intervals,
            uniform,
        })
    }

    pub fn tr(&self) -> Nanos {
        self.tr
    }

    pub fn td(&self) -> Nanos {
        self.td
    }

    /// Number of symbols `M`.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Nanos] {
        &self.intervals
    }

    /// Interval of the symbol with 0-based index `i`.
    pub fn interval(&self, i: usize) -> Nanos {
        self.intervals[i]
    }

    pub fn shortest(&self) -> Nanos {
        self.intervals[0]
    }

    pub fn longest(&self) -> Nanos {
        self.intervals[self.intervals.len() - 1]
    }

    /// Whether the ladder was built from `(T_r, T_d, M)` or is equally spaced.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }
}

/// Builds the uniform interval ladder for `(T_r, T_d, M)`.
pub fn build_alphabet(tr: Nanos, td: Nanos, m: usize) -> Result<SymbolAlphabet> {
    SymbolAlphabet::uniform(tr, td, m)
}

/// `floor(n·log2 m)` computed exactly whenever `m^n` fits in 128 bits.
fn floor_n_log2(m: usize, n: usize) -> u32 {
    match checked_pow(m as u128, n) {
        Some(p) => 127 - p.leading_zeros(),
        None => (n as f64 * (m as f64).log2() + FRAC_EPS).floor() as u32,
    }
}

/// Fractional part of `n·log2 m`, exactly zero when `m^n` is a power of two.
fn frac_n_log2(m: usize, n: usize) -> f64 {
    if let Some(p) = checked_pow(m as u128, n) {
        if p.is_power_of_two() {
            return 0.0;
        }
    }
    let x = n as f64 * (m as f64).log2();
    (x - floor_n_log2(m, n) as f64).max(0.0)
}

fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Block length minimising the fractional part of `N·log2 M` over
/// `1 <= N < n_max` (ties go to the smaller `N`). `N = 1` is always a
/// candidate, so `n_max <= 2` yields 1.
pub fn optimal_block_length(m: usize, n_max: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::invalid(format!("M must be at least 2, got {m}")));
    }
    if n_max < 1 {
        return Err(Error::invalid("N_max must be at least 1"));
    }
    let mut best = (1, frac_n_log2(m, 1));
    for n in 2..n_max {
        let f = frac_n_log2(m, n);
        if f < best.1 - FRAC_EPS {
            best = (n, f);
        }
    }
    Ok(best.0)
}

/// Number of bits a block of `n_star` symbols carries: `floor(N*·log2 M)`.
pub fn payload_bits(m: usize, n_star: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::invalid(format!("M must be at least 2, got {m}")));
    }
    if n_star < 1 {
        return Err(Error::invalid("N* must be at least 1"));
    }
    Ok(floor_n_log2(m, n_star) as usize)
}

/// A single codeword, borrowed from its [`Codebook`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword<'a> {
    /// Payload value carried by the codeword.
    pub index: usize,
    /// 0-based alphabet indices, one per block position.
    pub symbols: &'a [u16],
    /// Sum of the intervals in the block.
    pub duration: Nanos,
}

/// The `2^L` shortest blocks of `N*` symbols, in payload order.
#[derive(Debug, Clone)]
pub struct Codebook {
    alphabet: SymbolAlphabet,
    block_length: usize,
    payload_bits: usize,
    symbols: Vec<u16>,
    durations: Vec<Nanos>,
    lookup: HashMap<u64, u32>,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet
            && self.block_length == other.block_length
            && self.payload_bits == other.payload_bits
            && self.symbols == other.symbols
            && self.durations == other.durations
    }
}

/// Selects the codewords for `(alphabet, N*, L)`, enumerating at most
/// [`DEFAULT_TUPLE_CAP`] tuples.
pub fn select_codewords(alphabet: &SymbolAlphabet, n_star: usize, l: usize) -> Result<Codebook> {
    Codebook::select(alphabet, n_star, l, DEFAULT_TUPLE_CAP)
}

impl Codebook {
    /// Full design from a ladder: optimal `N*`, `L`, and the codeword set.
    pub fn design(alphabet: &SymbolAlphabet, n_max: usize) -> Result<Self> {
        let n_star = optimal_block_length(alphabet.len(), n_max)?;
        let l = payload_bits(alphabet.len(), n_star)?;
        select_codewords(alphabet, n_star, l)
    }

    /// Codeword selection with an explicit enumeration cap on `M^N*`.
    pub fn select(alphabet: &SymbolAlphabet, n_star: usize, l: usize, cap: u128) -> Result<Self> {
        let m = alphabet.len();
        if n_star < 1 {
            return Err(Error::invalid("N* must be at least 1"));
        }
        if l < 1 {
            return Err(Error::invalid("L must be at least 1"));
        }
        if l > 40 {
            return Err(Error::invalid(format!(
                "L = {l} is too large to materialise"
            )));
        }
        let available = checked_pow(m as u128, n_star).unwrap_or(u128::MAX);
        let required = 1u128 << l;
        if available < required {
            return Err(Error::InsufficientTuples {
                available,
                required,
            });
        }
        if available > cap {
            return Err(Error::TooManyTuples {
                tuples: available,
                cap,
            });
        }

        let (boundary, boundary_quota) = selection_boundary(alphabet, n_star, required as u64);
        let count = required as usize;
        let mut tuples: Vec<(Nanos, Vec<u16>)> = Vec::with_capacity(count);
        let mut quota = boundary_quota;
        let mut prefix = vec![0u16; n_star];
        collect_shortest(
            alphabet,
            &mut prefix,
            0,
            0,
            boundary,
            &mut quota,
            &mut tuples,
        );
        debug_assert_eq!(tuples.len(), count);

        // The walk is lexicographic, so a stable sort on duration yields
        // (duration, lexicographic) order.
        tuples.sort_by_key(|(d, _)| *d);

        let mut symbols = Vec::with_capacity(count * n_star);
        let mut durations = Vec::with_capacity(count);
        let mut lookup = HashMap::with_capacity(count);
        for (k, (d, t)) in tuples.into_iter().enumerate() {
            lookup.insert(tuple_key(m, &t), k as u32);
            symbols.extend_from_slice(&t);
            durations.push(d);
        }
        Ok(Codebook {
            alphabet: alphabet.clone(),
            block_length: n_star,
            payload_bits: l,
            symbols,
            durations,
            lookup,
        })
    }

    pub fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    /// `N*`.
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// `L`.
    pub fn payload_bits(&self) -> usize {
        self.payload_bits
    }

    /// Number of codewords, `2^L`.
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn codeword(&self, index: usize) -> Codeword<'_> {
        let n = self.block_length;
        Codeword {
            index,
            symbols: &self.symbols[index * n..(index + 1) * n],
            duration: self.durations[index],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Codeword<'_>> + '_ {
        (0..self.len()).map(move |k| self.codeword(k))
    }

    pub fn durations(&self) -> &[Nanos] {
        &self.durations
    }

    /// `Σ d_k` over all codewords.
    pub fn total_duration(&self) -> i128 {
        self.durations.iter().map(|&d| d as i128).sum()
    }

    /// Payload value of an exact codeword, if the tuple is one.
    pub fn index_of(&self, symbols: &[u16]) -> Option<usize> {
        if symbols.len() != self.block_length
            || symbols.iter().any(|&s| s as usize >= self.alphabet.len())
        {
            return None;
        }
        self.lookup
            .get(&tuple_key(self.alphabet.len(), symbols))
            .map(|&k| k as usize)
    }

    /// Codeword closest to `symbols` in total absolute interval difference
    /// `Σ_j |τ(symbols[j]) − τ(codeword[j])|`. Ties go to the smaller payload
    /// value.
    pub fn nearest(&self, symbols: &[u16]) -> usize {
        assert_eq!(
            symbols.len(),
            self.block_length,
            "tuple length must equal N*"
        );
        if let Some(k) = self.index_of(symbols) {
            return k;
        }
        let tau = self.alphabet.intervals();
        let m = tau.len();
        // Per position, alphabet symbols ordered by their distance to the
        // received interval.
        let orders: Vec<Vec<(Nanos, u16)>> = symbols
            .iter()
            .map(|&s| {
                let r = tau[(s as usize).min(m - 1)];
                let mut o: Vec<(Nanos, u16)> =
                    (0..m).map(|i| ((tau[i] - r).abs(), i as u16)).collect();
                o.sort();
                o
            })
            .collect();

        // Best-first walk over rank vectors in nondecreasing cost. A vector is
        // reached by raising coordinates in nondecreasing coordinate order,
        // so each one is pushed exactly once.
        let start = vec![0usize; self.block_length];
        let start_cost: Nanos = orders.iter().map(|o| o[0].0).sum();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((start_cost, start, 0usize)));
        let mut best: Option<(Nanos, usize)> = None;
        let mut tuple = vec![0u16; self.block_length];
        while let Some(Reverse((cost, ranks, last))) = heap.pop() {
            if let Some((bc, _)) = best {
                if cost > bc {
                    break;
                }
            }
            for (j, &r) in ranks.iter().enumerate() {
                tuple[j] = orders[j][r].1;
            }
            if let Some(k) = self.index_of(&tuple) {
                best = match best {
                    Some((bc, bk)) if bk <= k => Some((bc, bk)),
                    _ => Some((cost, k)),
                };
            }
            for j in last..ranks.len() {
                if ranks[j] + 1 < m {
                    let mut next = ranks.clone();
                    next[j] += 1;
                    let c = cost - orders[j][ranks[j]].0 + orders[j][ranks[j] + 1].0;
                    heap.push(Reverse((c, next, j)));
                }
            }
        }
        best.expect("a codebook always contains at least one codeword")
            .1
    }

    /// Deterministic text export: a format line, the design parameters, then
    /// one `index symbols... d_ns` line per codeword with 1-based symbols.
    pub fn to_text(&self) -> Result<String> {
        if !self.alphabet.is_uniform() {
            return Err(Error::invalid(
                "only (T_r, T_d, M) ladders can be exported as text",
            ));
        }
        let mut out = String::with_capacity(self.len() * (self.block_length * 2 + 16) + 64);
        out.push_str(TEXT_MAGIC);
        out.push('\n');
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.alphabet.tr(),
            self.alphabet.td(),
            self.alphabet.len(),
            self.block_length,
            self.payload_bits
        );
        for cw in self.iter() {
            let _ = write!(out, "{}", cw.index);
            for &s in cw.symbols {
                let _ = write!(out, " {}", s as usize + 1);
            }
            let _ = writeln!(out, " {}", cw.duration);
        }
        Ok(out)
    }

    /// Parses the text export. The codeword lines must match the canonical
    /// selection for the stated parameters exactly.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        match lines.next() {
            Some((_, TEXT_MAGIC)) => {}
            Some((n, other)) => {
                return Err(Error::parse(
                    n,
                    format!("expected `{TEXT_MAGIC}`, found `{other}`"),
                ))
            }
            None => return Err(Error::parse(1, "empty codebook file")),
        }
        let (n, header) = lines
            .next()
            .ok_or_else(|| Error::parse(2, "missing parameter line"))?;
        let fields: Vec<i64> = header
            .split_whitespace()
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(n, format!("bad parameter line: {e}")))?;
        let [tr, td, m, n_star, l] = fields[..] else {
            return Err(Error::parse(
                n,
                "parameter line needs `Tr_ns Td_ns M Nstar L`",
            ));
        };
        if m < 2 || n_star < 1 || l < 1 {
            return Err(Error::parse(n, "M, Nstar and L out of range"));
        }
        let alphabet = SymbolAlphabet::uniform(tr, td, m as usize)
            .map_err(|e| Error::parse(n, e.to_string()))?;
        let book = Codebook::select(&alphabet, n_star as usize, l as usize, DEFAULT_TUPLE_CAP)
            .map_err(|e| Error::parse(n, e.to_string()))?;

        let mut seen = 0usize;
        let mut tuple = Vec::with_capacity(book.block_length);
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<i64> = line
                .split_whitespace()
                .map(|f| f.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(n, format!("bad codeword line: {e}")))?;
            if toks.len() != book.block_length + 2 {
                return Err(Error::parse(
                    n,
                    format!(
                        "expected {} fields, found {}",
                        book.block_length + 2,
                        toks.len()
                    ),
                ));
            }
            if seen >= book.len() {
                return Err(Error::parse(n, "more codewords than 2^L"));
            }
            let expected = book.codeword(seen);
            tuple.clear();
            for &s in &toks[1..=book.block_length] {
                if s < 1 || s > m {
                    return Err(Error::parse(n, format!("symbol {s} outside 1..={m}")));
                }
                tuple.push((s - 1) as u16);
            }
            if toks[0] != seen as i64
                || tuple.as_slice() != expected.symbols
                || toks[book.block_length + 1] != expected.duration
            {
                return Err(Error::parse(
                    n,
                    "codeword does not match the canonical selection",
                ));
            }
            seen += 1;
        }
        if seen != book.len() {
            return Err(Error::parse(
                0,
                format!("expected {} codewords, found {seen}", book.len()),
            ));
        }
        Ok(book)
    }
}

const TEXT_MAGIC: &str = "EIM-CODEBOOK v1";

/// Lexicographic rank of a tuple within the full product of the alphabet.
fn tuple_key(m: usize, t: &[u16]) -> u64 {
    t.iter().fold(0u64, |acc, &s| acc * m as u64 + s as u64)
}

/// Duration histogram of all `M^n` tuples: total duration -> tuple count.
fn duration_distribution(alphabet: &SymbolAlphabet, n: usize) -> BTreeMap<Nanos, u128> {
    let mut dist = BTreeMap::from([(0, 1u128)]);
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for (&d, &c) in &dist {
            for &tau in alphabet.intervals() {
                *next.entry(d + tau).or_insert(0) += c;
            }
        }
        dist = next;
    }
    dist
}

/// The largest selected duration and how many tuples of exactly that
/// duration are selected.
fn selection_boundary(alphabet: &SymbolAlphabet, n: usize, count: u64) -> (Nanos, u64) {
    let mut need = count as u128;
    for (d, c) in duration_distribution(alphabet, n) {
        if c >= need {
            return (d, need as u64);
        }
        need -= c;
    }
    unreachable!("caller checked that M^N >= count")
}

/// Depth-first lexicographic walk collecting every tuple shorter than
/// `boundary` and the first `quota` tuples equal to it.
fn collect_shortest(
    alphabet: &SymbolAlphabet,
    prefix: &mut [u16],
    depth: usize,
    sum: Nanos,
    boundary: Nanos,
    quota: &mut u64,
    out: &mut Vec<(Nanos, Vec<u16>)>,
) {
    let n = prefix.len();
    if depth == n {
        if sum < boundary {
            out.push((sum, prefix.to_vec()));
        } else if sum == boundary && *quota > 0 {
            *quota -= 1;
            out.push((sum, prefix.to_vec()));
        }
        return;
    }
    let rest_min = alphabet.shortest() * (n - depth - 1) as Nanos;
    for (i, &tau) in alphabet.intervals().iter().enumerate() {
        if sum + tau + rest_min > boundary {
            break;
        }
        prefix[depth] = i as u16;
        collect_shortest(alphabet, prefix, depth + 1, sum + tau, boundary, quota, out);
    }
}

/// `Σ d_k` of the `count` shortest `n`-tuples, without materialising them.
pub fn min_total_duration(alphabet: &SymbolAlphabet, n: usize, count: u128) -> Option<u128> {
    let mut need = count;
    let mut total: u128 = 0;
    for (d, c) in duration_distribution(alphabet, n) {
        let take = c.min(need);
        total += take * d as u128;
        need -= take;
        if need == 0 {
            return Some(total);
        }
    }
    None
}

fn bitrate_from_total(l: usize, total_ns: u128) -> f64 {
    let codewords = (1u128 << l) as f64;
    codewords * l as f64 / to_seconds_u128(total_ns)
}

fn to_seconds_u128(ns: u128) -> f64 {
    ns as f64 / 1e9
}

/// Bit rate in bits/s: `2^L·L / Σ d_k`.
pub fn bitrate_general(codebook: &Codebook) -> f64 {
    bitrate_from_total(codebook.payload_bits, codebook.total_duration() as u128)
}

/// Closed-form bit rate of the uniform ladder when `M = 2^L`:
/// `2L / (2·T_r + T_d·(M − 1))`.
pub fn bitrate_uniform(tr: Nanos, td: Nanos, m: usize, l: usize) -> Result<f64> {
    if !m.is_power_of_two() || m < 2 {
        return Err(Error::invalid(format!("M = {m} is not a power of two")));
    }
    if 1usize.checked_shl(l as u32) != Some(m) {
        return Err(Error::invalid(format!("M = {m} does not equal 2^{l}")));
    }
    if tr <= 0 || td <= 0 {
        return Err(Error::invalid("T_r and T_d must be positive"));
    }
    let denom = 2 * tr + td * (m as Nanos - 1);
    Ok(2.0 * l as f64 / to_seconds(denom))
}

/// The optimal design for one alphabet size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignPoint {
    pub m: usize,
    pub n_star: usize,
    pub l: usize,
    pub bitrate_bps: f64,
}

/// Design table over a range of `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MSweep {
    pub points: Vec<DesignPoint>,
    /// `M` with the highest bit rate (smallest `M` on exact ties).
    pub argmax_m: usize,
    /// `M` chosen by the preference rule: among designs within `epsilon`
    /// (relative) of the best bit rate, the smallest `N*`, then smallest `M`.
    pub selected_m: usize,
    pub epsilon: f64,
}

impl MSweep {
    pub fn point(&self, m: usize) -> Option<&DesignPoint> {
        self.points.iter().find(|p| p.m == m)
    }
}

/// Optimal design for `alphabet` without materialising the codebook.
pub fn design_point(alphabet: &SymbolAlphabet, n_max: usize) -> Result<DesignPoint> {
    let m = alphabet.len();
    let n_star = optimal_block_length(m, n_max)?;
    let l = payload_bits(m, n_star)?;
    if l > 100 {
        return Err(Error::invalid(format!("L = {l} is too large")));
    }
    let total = min_total_duration(alphabet, n_star, 1u128 << l)
        .ok_or_else(|| Error::invalid("not enough tuples"))?;
    Ok(DesignPoint {
        m,
        n_star,
        l,
        bitrate_bps: bitrate_from_total(l, total),
    })
}

/// Evaluates every `M` in `m_range` for the uniform ladder `(T_r, T_d)`.
///
/// Bit rates come from the duration distribution of the block product, so
/// large `M^N*` never has to be enumerated.
pub fn sweep_m(
    tr: Nanos,
    td: Nanos,
    m_range: RangeInclusive<usize>,
    n_max: usize,
    epsilon: f64,
) -> Result<MSweep> {
    if m_range.is_empty() {
        return Err(Error::invalid("empty M range"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    let ms: Vec<usize> = m_range.collect();
    let points = ms
        .par_iter()
        .map(|&m| build_alphabet(tr, td, m).and_then(|a| design_point(&a, n_max)))
        .collect::<Result<Vec<_>>>()?;

    let best = points
        .iter()
        .fold(None::<&DesignPoint>, |acc, p| match acc {
            Some(a) if a.bitrate_bps >= p.bitrate_bps => Some(a),
            _ => Some(p),
        })
        .unwrap();
    let floor = best.bitrate_bps * (1.0 - epsilon);
    let selected = points
        .iter()
        .filter(|p| p.bitrate_bps >= floor)
        .min_by_key(|p| (p.n_star, p.m))
        .unwrap();
    Ok(MSweep {
        argmax_m: best.m,
        selected_m: selected.m,
        epsilon,
        points,
    })
}
