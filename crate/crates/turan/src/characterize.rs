//! Entropy characterization: write a data pattern, read every row many
//! times, and reduce the per-cell one-counts to Shannon entropies per
//! cell, per row, and per 32-bit block (two vertically adjacent rows).
//!
//! Characterization operates on a snapshot of the block, and its random
//! draws are keyed by `(seed, block)` only — not by operating point — so
//! sweep curves use common random numbers and are exactly reproducible
//! regardless of evaluation order or parallelism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fault::{flip_probability, OperatingPoint, SramBlock};
use crate::rng::ReadStream;

const DOMAIN_CHARACTERIZE: u64 = 0xC4A2;

/// Row data patterns. Single-letter kinds write the same 16-bit word to
/// every row; `A5` and `C3` alternate two words across consecutive rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataPattern {
    F,
    A,
    Five,
    Zero,
    Three,
    C,
    A5,
    C3,
}

impl DataPattern {
    pub const ALL: [DataPattern; 8] = [
        DataPattern::F,
        DataPattern::A,
        DataPattern::Five,
        DataPattern::Zero,
        DataPattern::Three,
        DataPattern::C,
        DataPattern::A5,
        DataPattern::C3,
    ];

    /// 16-bit word written to `row`.
    pub fn row_word(self, row: u32) -> u16 {
        match self {
            DataPattern::F => 0xFFFF,
            DataPattern::A => 0xAAAA,
            DataPattern::Five => 0x5555,
            DataPattern::Zero => 0x0000,
            DataPattern::Three => 0x3333,
            DataPattern::C => 0xCCCC,
            DataPattern::A5 => {
                if row % 2 == 0 {
                    0xAAAA
                } else {
                    0x5555
                }
            }
            DataPattern::C3 => {
                if row % 2 == 0 {
                    0xCCCC
                } else {
                    0x3333
                }
            }
        }
    }

    /// Pattern bits for a row of `cols` cells; the 16-bit word repeats for
    /// wider rows. Bit 15 of the word lands in column 0.
    pub fn row_bits(self, row: u32, cols: u32) -> Vec<bool> {
        let word = self.row_word(row);
        (0..cols)
            .map(|c| (word >> (15 - (c % 16) as u16)) & 1 == 1)
            .collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            DataPattern::F => "F",
            DataPattern::A => "A",
            DataPattern::Five => "5",
            DataPattern::Zero => "0",
            DataPattern::Three => "3",
            DataPattern::C => "C",
            DataPattern::A5 => "A5",
            DataPattern::C3 => "C3",
        }
    }
}

impl fmt::Display for DataPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DataPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F" => Ok(DataPattern::F),
            "A" => Ok(DataPattern::A),
            "5" => Ok(DataPattern::Five),
            "0" => Ok(DataPattern::Zero),
            "3" => Ok(DataPattern::Three),
            "C" => Ok(DataPattern::C),
            "A5" => Ok(DataPattern::A5),
            "C3" => Ok(DataPattern::C3),
            other => Err(Error::invalid(format!(
                "unknown data pattern {other:?} (expected F, A, 5, 0, 3, C, A5, C3)"
            ))),
        }
    }
}

impl Serialize for DataPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DataPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary Shannon entropy of a probability-of-1, in bits, with the
/// convention `0 * log2(0) = 0`.
pub fn shannon_entropy(p1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::invalid(format!("p1 = {p1} outside [0, 1]")));
    }
    Ok(binary_entropy(p1))
}

#[inline]
fn binary_entropy(p1: f64) -> f64 {
    let p0 = 1.0 - p1;
    let mut h = 0.0;
    if p1 > 0.0 {
        h -= p1 * p1.log2();
    }
    if p0 > 0.0 {
        h -= p0 * p0.log2();
    }
    h
}

/// Per-cell one-counts and derived entropies for one (block, operating
/// point, pattern) evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub rows: u32,
    pub cols: u32,
    pub reads: u32,
    pub ones_count: Vec<u32>,
    pub cell_entropy: Vec<f64>,
    pub row_entropy: Vec<f64>,
    /// One entry per non-overlapping pair of adjacent rows (2w, 2w+1).
    pub block32_entropy: Vec<f64>,
}

impl EntropyRecord {
    pub fn max_block32(&self) -> f64 {
        self.block32_entropy.iter().copied().fold(0.0, f64::max)
    }

    pub fn avg_block32(&self) -> f64 {
        if self.block32_entropy.is_empty() {
            return 0.0;
        }
        self.block32_entropy.iter().sum::<f64>() / self.block32_entropy.len() as f64
    }
}

/// Algorithm-1 characterization: write `pattern` to every row of a
/// snapshot of `block`, read each row `reads` times at `op`, and compute
/// entropies from the empirical probability of sensing 1.
pub fn characterize_rows(
    block: &SramBlock,
    op: &OperatingPoint,
    pattern: DataPattern,
    reads: u32,
) -> Result<EntropyRecord> {
    if reads == 0 {
        return Err(Error::invalid("characterize_rows requires reads >= 1"));
    }
    op.validate()?;
    let mut snapshot = block.clone();
    let geom = *snapshot.geometry();
    let cfg = *snapshot.config();
    let stream = ReadStream::new(
        snapshot.seed(),
        DOMAIN_CHARACTERIZE ^ ((snapshot.block_index() as u64) << 16),
    );

    let rows = geom.rows;
    let cols = geom.cols as usize;
    let mut ones_count = vec![0u32; rows as usize * cols];

    for row in 0..rows {
        snapshot.write_row(row, &pattern.row_bits(row, geom.cols))?;
        // Per-cell probabilities are constant over the read loop except for
        // the stored bit, which the destructive channel may flip; keep both
        // variants precomputed.
        let mut stored: Vec<bool> = (0..geom.cols)
            .map(|c| snapshot.stored_bit(row, c))
            .collect();
        let mut p1 = vec![(0.0f64, 0.0f64); cols]; // (a, d_prob * a) stored = 1
        let mut p0 = vec![(0.0f64, 0.0f64); cols]; // stored = 0
        let mut qs = vec![0.0f64; cols];
        for c in 0..cols {
            let cell = *snapshot.cell(row, c as u32);
            let (a1, q) = flip_probability(&cell, true, op, &cfg);
            let (a0, _) = flip_probability(&cell, false, op, &cfg);
            p1[c] = (a1, cell.d_prob * a1);
            p0[c] = (a0, cell.d_prob * a0);
            qs[c] = q;
        }
        let mut stream = stream.clone();
        stream.seek(row as u64 * reads as u64);
        let base = row as usize * cols;
        for _ in 0..reads {
            for c in 0..cols {
                let draws = stream.cell_draws(row, c as u32);
                let (_, d_pre) = if stored[c] { p1[c] } else { p0[c] };
                if draws.destruct < d_pre {
                    stored[c] = !stored[c];
                }
                let (a, _) = if stored[c] { p1[c] } else { p0[c] };
                let sensed = if draws.access < a {
                    draws.outcome < qs[c]
                } else {
                    stored[c]
                };
                ones_count[base + c] += sensed as u32;
            }
            stream.advance();
        }
    }

    let cell_entropy: Vec<f64> = ones_count
        .iter()
        .map(|&n| binary_entropy(n as f64 / reads as f64))
        .collect();
    let row_entropy: Vec<f64> = (0..rows as usize)
        .map(|r| cell_entropy[r * cols..(r + 1) * cols].iter().sum())
        .collect();
    let block32_entropy: Vec<f64> = (0..rows as usize / 2)
        .map(|w| row_entropy[2 * w] + row_entropy[2 * w + 1])
        .collect();

    Ok(EntropyRecord {
        rows,
        cols: geom.cols,
        reads,
        ones_count,
        cell_entropy,
        row_entropy,
        block32_entropy,
    })
}

/// Axes of a characterization sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub voltages_mv: Vec<f64>,
    pub frequencies_mhz: Vec<f64>,
    pub temperatures_c: Vec<f64>,
    pub patterns: Vec<DataPattern>,
    pub reads_per_row: u32,
    pub voltage_step_mv: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            voltages_mv: voltage_range(535.0, 580.0, 5.0),
            frequencies_mhz: vec![200.0],
            temperatures_c: vec![45.0],
            patterns: vec![DataPattern::F],
            reads_per_row: 1000,
            voltage_step_mv: 5.0,
        }
    }
}

/// Inclusive voltage grid from `start` to `end` in `step` increments.
pub fn voltage_range(start_mv: f64, end_mv: f64, step_mv: f64) -> Vec<f64> {
    let mut v = start_mv;
    let mut out = Vec::new();
    while v <= end_mv + 1e-9 {
        out.push(v);
        v += step_mv;
    }
    out
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.voltages_mv.is_empty()
            || self.frequencies_mhz.is_empty()
            || self.temperatures_c.is_empty()
            || self.patterns.is_empty()
        {
            return Err(Error::invalid("sweep axes must be non-empty"));
        }
        if self.reads_per_row == 0 {
            return Err(Error::invalid("reads_per_row must be >= 1"));
        }
        if !(self.voltage_step_mv > 0.0) {
            return Err(Error::invalid("voltage_step_mv must be positive"));
        }
        Ok(())
    }

    /// Operating points in a fixed order: patterns, then temperatures,
    /// then frequencies, then voltages (voltage varies fastest).
    pub fn op_points(&self) -> Vec<(OperatingPoint, DataPattern)> {
        let mut out = Vec::new();
        for &pattern in &self.patterns {
            for &t in &self.temperatures_c {
                for &f in &self.frequencies_mhz {
                    for &v in &self.voltages_mv {
                        out.push((OperatingPoint::new(v, f, t), pattern));
                    }
                }
            }
        }
        out
    }
}

/// Aggregate entropy figures for one operating point across all blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpPointSummary {
    pub voltage_mv: f64,
    pub frequency_mhz: f64,
    pub temperature_c: f64,
    pub pattern: DataPattern,
    pub max_block32_entropy: f64,
    pub avg_block32_entropy: f64,
    /// Block holding the maximum-entropy 32-bit window.
    pub best_block: u32,
    /// First row of that window (the window is rows `r` and `r + 1`).
    pub best_window_row: u32,
    /// Row of the window with the larger row entropy.
    pub best_row: u32,
    pub best_row_entropy: f64,
}

/// Sweep output: one summary per operating point plus the overall best.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub seed: u64,
    pub reads_per_row: u32,
    pub summaries: Vec<OpPointSummary>,
    pub best_op: OperatingPoint,
    pub best_pattern: DataPattern,
    pub best_block: u32,
    pub best_row: u32,
    pub best_row_entropy: f64,
    pub max_block32_entropy: f64,
    /// Average 32-bit-block entropy at the best operating point.
    pub avg_block32_entropy: f64,
}

struct BlockEval {
    max: f64,
    sum: f64,
    windows: usize,
    best_window: u32,
    row_a_entropy: f64,
    row_b_entropy: f64,
}

fn eval_block(
    block: &SramBlock,
    op: &OperatingPoint,
    pattern: DataPattern,
    reads: u32,
) -> Result<BlockEval> {
    let rec = characterize_rows(block, op, pattern, reads)?;
    let mut best_window = 0u32;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (w, &h) in rec.block32_entropy.iter().enumerate() {
        sum += h;
        if h > max {
            max = h;
            best_window = w as u32;
        }
    }
    if rec.block32_entropy.is_empty() {
        max = 0.0;
    }
    Ok(BlockEval {
        max,
        sum,
        windows: rec.block32_entropy.len(),
        best_window,
        row_a_entropy: rec.row_entropy[2 * best_window as usize],
        row_b_entropy: rec.row_entropy[2 * best_window as usize + 1],
    })
}

/// Evaluates `characterize_rows` over the Cartesian product of the sweep
/// axes and aggregates per-op-point maxima and averages. Work fans out
/// across threads; the merge is in fixed index order, so the report is
/// identical for any thread count.
pub fn sweep(blocks: &[SramBlock], cfg: &SweepConfig) -> Result<CharacterizationReport> {
    if blocks.is_empty() {
        return Err(Error::invalid("sweep requires at least one block"));
    }
    cfg.validate()?;
    let points = cfg.op_points();
    let mut tasks = Vec::with_capacity(points.len() * blocks.len());
    for (pi, (op, pattern)) in points.iter().enumerate() {
        for (bi, block) in blocks.iter().enumerate() {
            tasks.push((pi, bi, *op, *pattern, block));
        }
    }
    let mut evals: Vec<(usize, usize, BlockEval)> = tasks
        .into_par_iter()
        .map(|(pi, bi, op, pattern, block)| {
            eval_block(block, &op, pattern, cfg.reads_per_row).map(|e| (pi, bi, e))
        })
        .collect::<Result<Vec<_>>>()?;
    evals.sort_by_key(|&(pi, bi, _)| (pi, bi));

    let mut summaries = Vec::with_capacity(points.len());
    for (pi, (op, pattern)) in points.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut windows = 0usize;
        let mut best: Option<(u32, &BlockEval)> = None;
        for (_, bi, eval) in evals.iter().filter(|&&(p, _, _)| p == pi) {
            sum += eval.sum;
            windows += eval.windows;
            let block_id = blocks[*bi].block_index();
            let better = eval.max > max
                || (eval.max == max
                    && best.map_or(true, |(id, b)| {
                        (block_id, eval.best_window) < (id, b.best_window)
                    }));
            if better {
                max = eval.max;
                best = Some((block_id, eval));
            }
        }
        let (best_block, best_eval) = best.expect("at least one block");
        let (best_row, best_row_entropy) = if best_eval.row_b_entropy > best_eval.row_a_entropy {
            (2 * best_eval.best_window + 1, best_eval.row_b_entropy)
        } else {
            (2 * best_eval.best_window, best_eval.row_a_entropy)
        };
        summaries.push(OpPointSummary {
            voltage_mv: op.voltage_mv,
            frequency_mhz: op.frequency_mhz,
            temperature_c: op.temperature_c,
            pattern: *pattern,
            max_block32_entropy: max,
            avg_block32_entropy: if windows == 0 { 0.0 } else { sum / windows as f64 },
            best_block,
            best_window_row: 2 * best_eval.best_window,
            best_row,
            best_row_entropy,
        })
    }

    // Overall best op point: highest max entropy; ties prefer the lowest
    // (block, row, voltage).
    let mut best_idx = 0usize;
    for i in 1..summaries.len() {
        let (a, b) = (&summaries[i], &summaries[best_idx]);
        let better = a.max_block32_entropy > b.max_block32_entropy
            || (a.max_block32_entropy == b.max_block32_entropy
                && (a.best_block, a.best_window_row, a.voltage_mv)
                    < (b.best_block, b.best_window_row, b.voltage_mv));
        if better {
            best_idx = i;
        }
    }
    let best = &summaries[best_idx];
    Ok(CharacterizationReport {
        seed: blocks[0].seed(),
        reads_per_row: cfg.reads_per_row,
        best_op: OperatingPoint::new(best.voltage_mv, best.frequency_mhz, best.temperature_c),
        best_pattern: best.pattern,
        best_block: best.best_block,
        best_row: best.best_row,
        best_row_entropy: best.best_row_entropy,
        max_block32_entropy: best.max_block32_entropy,
        avg_block32_entropy: best.avg_block32_entropy,
        summaries,
    })
}

/// The row and operating point a TRNG run should read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySource {
    pub block: u32,
    pub row: u32,
    pub op: OperatingPoint,
    pub row_entropy_bits: f64,
}

/// Picks the row attaining the report's maximum 32-bit-block entropy.
/// Fails when the report saw no entropy anywhere (for example a sweep
/// confined to nominal voltage).
pub fn select_entropy_source(report: &CharacterizationReport) -> Result<EntropySource> {
    if report.max_block32_entropy <= 0.0 {
        return Err(Error::NoEntropySource(
            "all block entropies are zero; characterize at reduced voltage first".into(),
        ));
    }
    Ok(EntropySource {
        block: report.best_block,
        row: report.best_row,
        op: report.best_op,
        row_entropy_bits: report.best_row_entropy,
    })
}

/// Writes the per-op-point CSV (one row per operating point).
pub fn write_sweep_csv<W: std::io::Write>(
    report: &CharacterizationReport,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "voltage_mv",
        "freq_mhz",
        "temp_c",
        "pattern",
        "max_block32_entropy",
        "avg_block32_entropy",
    ])
    .map_err(csv_err)?;
    for s in &report.summaries {
        w.write_record([
            format!("{}", s.voltage_mv),
            format!("{}", s.frequency_mhz),
            format!("{}", s.temperature_c),
            s.pattern.to_string(),
            format!("{:.6}", s.max_block32_entropy),
            format!("{:.6}", s.avg_block32_entropy),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv write failed: {e}"))
}
