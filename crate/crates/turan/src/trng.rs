//! The TRNG pipeline: read a characterized high-entropy row until the
//! entropy target accumulates, then condition the raw bits with SHA-256.
//! Direct mode skips conditioning and emits bits from cells whose
//! measured entropy clears a near-1 threshold.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bitstream::BitBuffer;
use crate::characterize::{characterize_rows, DataPattern, EntropySource};
use crate::error::{Error, Result};
use crate::fault::{OperatingPoint, SramBlock};
use crate::rng::ReadStream;

/// Pipeline parameters. `source` comes from characterization; generation
/// fails without one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrngConfig {
    /// Entropy to accumulate before each hash, in bits.
    pub entropy_target_bits: f64,
    /// Characterized source row and the operating point to read it at.
    pub source: Option<EntropySource>,
    /// Cells at or above this measured entropy qualify for direct mode.
    pub direct_cell_threshold: f64,
}

impl Default for TrngConfig {
    fn default() -> Self {
        TrngConfig {
            entropy_target_bits: 256.0,
            source: None,
            direct_cell_threshold: 0.9999,
        }
    }
}

impl TrngConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.entropy_target_bits > 0.0) {
            return Err(Error::invalid("entropy_target_bits must be positive"));
        }
        if !(0.0..=1.0).contains(&self.direct_cell_threshold) {
            return Err(Error::invalid("direct_cell_threshold must be in [0, 1]"));
        }
        if let Some(src) = &self.source {
            if !(src.row_entropy_bits > 0.0) {
                return Err(Error::invalid("source row entropy must be positive"));
            }
        }
        Ok(())
    }

    fn require_source(&self) -> Result<&EntropySource> {
        self.source.as_ref().ok_or_else(|| {
            Error::NoEntropySource("TRNG source not set; run characterization first".into())
        })
    }
}

/// Packed output bits plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBitstream {
    pub bits: BitBuffer,
    pub conditioned: bool,
    pub n_reads_consumed: u64,
    pub source_op: OperatingPoint,
}

/// Reads needed for one conditioned output: `ceil(target / row_entropy)`.
pub fn n_reads_required(entropy_target_bits: f64, row_entropy_bits: f64) -> Result<u64> {
    if !(row_entropy_bits > 0.0) {
        return Err(Error::invalid(format!(
            "row entropy must be positive, got {row_entropy_bits}"
        )));
    }
    if !(entropy_target_bits > 0.0) || !entropy_target_bits.is_finite() {
        return Err(Error::invalid("entropy target must be positive and finite"));
    }
    Ok((entropy_target_bits / row_entropy_bits).ceil() as u64)
}

/// Writes all-ones to the source row and concatenates `n_reads_required`
/// sensed rows into an unconditioned bitstream.
pub fn accumulate_raw(
    block: &mut SramBlock,
    cfg: &TrngConfig,
    stream: &mut ReadStream,
) -> Result<RandomBitstream> {
    cfg.validate()?;
    let source = cfg.require_source()?;
    if source.block != block.block_index() {
        return Err(Error::invalid(format!(
            "source block {} does not match block {}",
            source.block,
            block.block_index()
        )));
    }
    let cols = block.geometry().cols;
    let n_reads = n_reads_required(cfg.entropy_target_bits, source.row_entropy_bits)?;
    // all-ones is the highest-entropy data pattern
    block.write_row(source.row, &DataPattern::F.row_bits(source.row, cols))?;
    let mut bits = BitBuffer::with_capacity((n_reads * cols as u64) as usize);
    let mut sensed = vec![false; cols as usize];
    for _ in 0..n_reads {
        block.read_row_into(source.row, &source.op, stream, &mut sensed);
        for &b in &sensed {
            bits.push(b);
        }
    }
    Ok(RandomBitstream {
        bits,
        conditioned: false,
        n_reads_consumed: n_reads,
        source_op: source.op,
    })
}

/// FIPS 180-4 SHA-256 digest.
pub fn sha256(message: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(message);
    hasher.finalize().into()
}

/// Produces `n_bits` conditioned bits: repeat {accumulate raw, hash} once
/// per 256 output bits and truncate the concatenated digests.
pub fn generate(
    block: &mut SramBlock,
    cfg: &TrngConfig,
    n_bits: u64,
    stream: &mut ReadStream,
) -> Result<RandomBitstream> {
    if n_bits == 0 {
        return Err(Error::invalid("n_bits must be positive"));
    }
    cfg.validate()?;
    let source = *cfg.require_source()?;
    let digests = n_bits.div_ceil(256);
    let mut bits = BitBuffer::with_capacity((digests * 256) as usize);
    let mut reads = 0u64;
    for _ in 0..digests {
        let raw = accumulate_raw(block, cfg, stream)?;
        reads += raw.n_reads_consumed;
        for byte in sha256(raw.bits.as_bytes()) {
            for i in 0..8 {
                bits.push((byte >> i) & 1 == 1);
            }
        }
    }
    bits.truncate(n_bits);
    Ok(RandomBitstream {
        bits,
        conditioned: true,
        n_reads_consumed: reads,
        source_op: source.op,
    })
}

/// Measures every cell's entropy over `reads` reads of the all-ones
/// pattern and returns the `(row, col)` pairs at or above `threshold`.
pub fn find_direct_cells(
    block: &SramBlock,
    op: &OperatingPoint,
    reads: u32,
    threshold: f64,
) -> Result<Vec<(u32, u32)>> {
    if reads < 1000 {
        return Err(Error::invalid(format!(
            "direct-cell search needs reads >= 1000, got {reads}"
        )));
    }
    let record = characterize_rows(block, op, DataPattern::F, reads)?;
    let cols = block.geometry().cols;
    let mut cells = Vec::new();
    for row in 0..block.geometry().rows {
        for col in 0..cols {
            if record.cell_entropy[(row * cols + col) as usize] >= threshold {
                cells.push((row, col));
            }
        }
    }
    Ok(cells)
}

/// Emits an unconditioned stream by interleaving the sensed bits of the
/// qualified cells, one row read per distinct row per round.
pub fn direct_bitstream(
    block: &mut SramBlock,
    cells: &[(u32, u32)],
    op: &OperatingPoint,
    n_bits: u64,
    stream: &mut ReadStream,
) -> Result<RandomBitstream> {
    if cells.is_empty() {
        return Err(Error::NoEntropySource(
            "no qualified direct cells to read".into(),
        ));
    }
    if n_bits == 0 {
        return Err(Error::invalid("n_bits must be positive"));
    }
    let cols = block.geometry().cols;
    let mut rows: Vec<u32> = cells.iter().map(|&(r, _)| r).collect();
    rows.sort_unstable();
    rows.dedup();
    for &row in &rows {
        block.write_row(row, &DataPattern::F.row_bits(row, cols))?;
    }
    let mut bits = BitBuffer::with_capacity(n_bits as usize);
    let mut reads = 0u64;
    let mut sensed = vec![false; cols as usize];
    'outer: loop {
        for &row in &rows {
            block.read_row_into(row, op, stream, &mut sensed);
            reads += 1;
            for &(r, c) in cells.iter().filter(|&&(r, _)| r == row) {
                debug_assert_eq!(r, row);
                bits.push(sensed[c as usize]);
                if bits.len() == n_bits {
                    break 'outer;
                }
            }
        }
    }
    Ok(RandomBitstream {
        bits,
        conditioned: false,
        n_reads_consumed: reads,
        source_op: *op,
    })
}
