//! Behavioral model of an SRAM block under voltage underscaling.
//!
//! Each cell carries a metastability midpoint `v_meta` drawn once from a
//! Gaussian (sigma = 20% of the population mean, mirroring Monte Carlo
//! process variation). A read at effective voltage `V_eff` triggers an
//! access-failure event with probability
//! `a = logistic((v_meta - V_eff) / a_slope)`; when the event fires the
//! sense amplifier resolves to 1 with the metastable bias
//! `q = clamp(0.5 + q_gamma * (V_eff - v_meta), 0, 1)`. Frequency and
//! temperature enter as additive shifts of the effective voltage. A rare
//! destructive channel flips the stored bit with probability
//! `d_prob * a` before sensing; non-destructive failures never touch the
//! stored array.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream_key, ReadStream};

/// Domain tag for cell-parameter sampling at block construction.
const DOMAIN_BUILD: u64 = 0xB10C;

/// Nominal supply voltage of the modeled SRAM blocks, in millivolts.
pub const NOMINAL_VOLTAGE_MV: f64 = 1000.0;

/// Minimum operating voltage: below this the device stops responding.
pub const MIN_OPERATING_VOLTAGE_MV: f64 = 535.0;

/// Array shape of the simulated device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SramGeometry {
    pub rows: u32,
    pub cols: u32,
    pub blocks: u32,
}

impl Default for SramGeometry {
    fn default() -> Self {
        SramGeometry {
            rows: 1024,
            cols: 16,
            blocks: 1,
        }
    }
}

impl SramGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.blocks == 0 {
            return Err(Error::invalid(format!(
                "geometry must be non-empty: {}x{}x{}",
                self.rows, self.cols, self.blocks
            )));
        }
        Ok(())
    }

    pub fn cells_per_block(&self) -> usize {
        self.rows as usize * self.cols as usize
    }
}

/// Supply voltage, clock frequency, and temperature: the knobs of every
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingPoint {
    pub voltage_mv: f64,
    pub frequency_mhz: f64,
    pub temperature_c: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        OperatingPoint {
            voltage_mv: NOMINAL_VOLTAGE_MV,
            frequency_mhz: 200.0,
            temperature_c: 45.0,
        }
    }
}

impl OperatingPoint {
    pub fn new(voltage_mv: f64, frequency_mhz: f64, temperature_c: f64) -> Self {
        OperatingPoint {
            voltage_mv,
            frequency_mhz,
            temperature_c,
        }
    }

    /// Nominal-voltage point at the reference frequency and temperature.
    pub fn nominal() -> Self {
        OperatingPoint::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voltage_mv > 0.0) || !(self.frequency_mhz > 0.0) {
            return Err(Error::invalid(format!(
                "operating point requires positive voltage and frequency, got {} mV / {} MHz",
                self.voltage_mv, self.frequency_mhz
            )));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::invalid("temperature must be finite"));
        }
        Ok(())
    }
}

/// Immutable per-cell variation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Metastability midpoint in millivolts.
    pub v_meta_mv: f64,
    /// Access-event transition width in millivolts.
    pub a_slope_mv: f64,
    /// Destructive read-failure probability scale, in [0, 0.04].
    pub d_prob: f64,
}

/// Calibration knobs of the fault model. The shipped defaults live in
/// `configs/default.json` and are produced by the `calibrate` routine;
/// `Default::default()` mirrors that file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultModelConfig {
    /// Population mean of `v_meta`, millivolts.
    pub v50_mv: f64,
    /// Std deviation of `v_meta` as a fraction of `v50_mv`.
    pub sigma_frac: f64,
    /// Access-event transition width, millivolts.
    pub a_slope_mv: f64,
    /// Metastable-outcome bias slope, per millivolt.
    pub q_gamma_per_mv: f64,
    /// Effective-voltage shift per log2 of frequency, millivolts.
    pub kappa_f_mv: f64,
    /// Effective-voltage shift per degree Celsius, millivolts.
    pub kappa_t_mv_per_c: f64,
    /// Stored-0 asymmetry factor: access probability for a stored 0 is
    /// `rho0` times the stored-1 probability.
    pub rho0: f64,
    /// Destructive read-failure scale copied into every cell.
    pub d_prob: f64,
    /// Reference frequency, megahertz.
    pub f_ref_mhz: f64,
    /// Reference temperature, degrees Celsius.
    pub t_ref_c: f64,
}

impl Default for FaultModelConfig {
    fn default() -> Self {
        // Calibrated against the failure-classification and entropy-sweep
        // targets; regenerate with `turan calibrate`.
        FaultModelConfig {
            v50_mv: 558.0,
            sigma_frac: 0.20,
            a_slope_mv: 8.0,
            q_gamma_per_mv: 0.024,
            kappa_f_mv: 45.0,
            kappa_t_mv_per_c: 0.5,
            rho0: 0.05,
            d_prob: 1.0e-4,
            f_ref_mhz: 200.0,
            t_ref_c: 45.0,
        }
    }
}

impl FaultModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("v50_mv", self.v50_mv),
            ("sigma_frac", self.sigma_frac),
            ("a_slope_mv", self.a_slope_mv),
            ("q_gamma_per_mv", self.q_gamma_per_mv),
            ("kappa_f_mv", self.kappa_f_mv),
            ("kappa_t_mv_per_c", self.kappa_t_mv_per_c),
            ("rho0", self.rho0),
            ("d_prob", self.d_prob),
            ("f_ref_mhz", self.f_ref_mhz),
            ("t_ref_c", self.t_ref_c),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.sigma_frac > 0.0 && self.sigma_frac < 1.0) {
            return Err(Error::invalid("sigma_frac must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.rho0) {
            return Err(Error::invalid("rho0 must be in [0, 1]"));
        }
        if !(0.0..=0.04).contains(&self.d_prob) {
            return Err(Error::invalid("d_prob must be in [0, 0.04]"));
        }
        if !(self.a_slope_mv > 0.0) {
            return Err(Error::invalid("a_slope_mv must be positive"));
        }
        if !(self.f_ref_mhz > 0.0) {
            return Err(Error::invalid("f_ref_mhz must be positive"));
        }
        Ok(())
    }

    /// Effective voltage seen by the failure mechanism: the supply voltage
    /// shifted by the frequency and temperature couplings.
    #[inline]
    pub fn effective_voltage_mv(&self, op: &OperatingPoint) -> f64 {
        op.voltage_mv
            + self.kappa_f_mv * (self.f_ref_mhz / op.frequency_mhz).log2()
            + self.kappa_t_mv_per_c * (op.temperature_c - self.t_ref_c)
    }
}

#[inline(always)]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Access-failure event probability `a` and metastable outcome bias `q`
/// for one read of `cell` holding `stored` at operating point `op`.
///
/// The observed probability of sensing 1 given stored = 1 is
/// `(1 - a) + a * q`.
pub fn flip_probability(
    cell: &CellParams,
    stored: bool,
    op: &OperatingPoint,
    config: &FaultModelConfig,
) -> (f64, f64) {
    let v_eff = config.effective_voltage_mv(op);
    let mut a = logistic((cell.v_meta_mv - v_eff) / cell.a_slope_mv);
    if !stored {
        a *= config.rho0;
    }
    let q = (0.5 + config.q_gamma_per_mv * (v_eff - cell.v_meta_mv)).clamp(0.0, 1.0);
    (a, q)
}

/// One simulated SRAM block: cells with frozen variation parameters plus
/// the mutable stored array. Construction is bit-reproducible from
/// `(seed, geometry, config, block_index)`.
#[derive(Debug, Clone)]
pub struct SramBlock {
    geometry: SramGeometry,
    config: FaultModelConfig,
    seed: u64,
    block_index: u32,
    cells: Vec<CellParams>,
    stored: Vec<bool>,
}

/// Builds block 0 of a device. See [`build_device`] for multi-block
/// geometries.
pub fn build_block(
    seed: u64,
    geometry: SramGeometry,
    config: FaultModelConfig,
) -> Result<SramBlock> {
    SramBlock::build(seed, geometry, config, 0)
}

/// Builds all `geometry.blocks` blocks of a device.
pub fn build_device(
    seed: u64,
    geometry: SramGeometry,
    config: FaultModelConfig,
) -> Result<Vec<SramBlock>> {
    (0..geometry.blocks)
        .map(|b| SramBlock::build(seed, geometry, config, b))
        .collect()
}

impl SramBlock {
    pub fn build(
        seed: u64,
        geometry: SramGeometry,
        config: FaultModelConfig,
        block_index: u32,
    ) -> Result<Self> {
        geometry.validate()?;
        config.validate()?;
        let key = stream_key(seed, DOMAIN_BUILD ^ ((block_index as u64) << 16));
        let sigma = config.sigma_frac * config.v50_mv;
        let mut cells = Vec::with_capacity(geometry.cells_per_block());
        for row in 0..geometry.rows {
            for col in 0..geometry.cols {
                let z = standard_normal(key, row as u64, col as u64);
                cells.push(CellParams {
                    v_meta_mv: config.v50_mv + sigma * z,
                    a_slope_mv: config.a_slope_mv,
                    d_prob: config.d_prob,
                });
            }
        }
        Ok(SramBlock {
            geometry,
            config,
            seed,
            block_index,
            cells,
            stored: vec![false; geometry.cells_per_block()],
        })
    }

    /// Test-only constructor for hand-built cell populations.
    pub fn from_cells(
        geometry: SramGeometry,
        config: FaultModelConfig,
        seed: u64,
        block_index: u32,
        cells: Vec<CellParams>,
    ) -> Result<Self> {
        geometry.validate()?;
        if cells.len() != geometry.cells_per_block() {
            return Err(Error::invalid(format!(
                "expected {} cells, got {}",
                geometry.cells_per_block(),
                cells.len()
            )));
        }
        Ok(SramBlock {
            geometry,
            config,
            seed,
            block_index,
            stored: vec![false; cells.len()],
            cells,
        })
    }

    pub fn geometry(&self) -> &SramGeometry {
        &self.geometry
    }

    pub fn config(&self) -> &FaultModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn block_index(&self) -> u32 {
        self.block_index
    }

    pub fn cell(&self, row: u32, col: u32) -> &CellParams {
        &self.cells[self.cell_index(row, col)]
    }

    pub fn stored_bit(&self, row: u32, col: u32) -> bool {
        self.stored[self.cell_index(row, col)]
    }

    #[inline]
    fn cell_index(&self, row: u32, col: u32) -> usize {
        debug_assert!(row < self.geometry.rows && col < self.geometry.cols);
        row as usize * self.geometry.cols as usize + col as usize
    }

    fn check_row(&self, row: u32) -> Result<()> {
        if row >= self.geometry.rows {
            return Err(Error::IndexOutOfRange(format!(
                "row {row} >= {}",
                self.geometry.rows
            )));
        }
        Ok(())
    }

    /// Overwrites one row with `pattern`. The only way (besides destructive
    /// read failures) that stored bits change.
    pub fn write_row(&mut self, row: u32, pattern: &[bool]) -> Result<()> {
        self.check_row(row)?;
        if pattern.len() != self.geometry.cols as usize {
            return Err(Error::invalid(format!(
                "pattern width {} != cols {}",
                pattern.len(),
                self.geometry.cols
            )));
        }
        let base = self.cell_index(row, 0);
        self.stored[base..base + pattern.len()].copy_from_slice(pattern);
        Ok(())
    }

    /// Reads one row at `op`, consuming one stream position. Access
    /// failures replace the sensed bit with a Bernoulli(q) draw; the
    /// destructive channel may flip the stored bit before sensing.
    pub fn read_row(
        &mut self,
        row: u32,
        op: &OperatingPoint,
        stream: &mut ReadStream,
    ) -> Result<Vec<bool>> {
        self.check_row(row)?;
        op.validate()?;
        let mut out = vec![false; self.geometry.cols as usize];
        self.read_row_into(row, op, stream, &mut out);
        Ok(out)
    }

    /// Hot-path row read without allocation or validation; `out` must have
    /// `cols` entries.
    pub(crate) fn read_row_into(
        &mut self,
        row: u32,
        op: &OperatingPoint,
        stream: &mut ReadStream,
        out: &mut [bool],
    ) {
        let cols = self.geometry.cols;
        for col in 0..cols {
            let idx = self.cell_index(row, col);
            let cell = self.cells[idx];
            let draws = stream.cell_draws(row, col);
            let (a_pre, _) = flip_probability(&cell, self.stored[idx], op, &self.config);
            if draws.destruct < cell.d_prob * a_pre {
                self.stored[idx] = !self.stored[idx];
            }
            let stored = self.stored[idx];
            let (a, q) = flip_probability(&cell, stored, op, &self.config);
            out[col as usize] = if draws.access < a {
                draws.outcome < q
            } else {
                stored
            };
        }
        stream.advance();
    }
}

/// Outcome of the five-step failure-classification experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureClassReport {
    pub voltage_mv: f64,
    pub trials: u64,
    pub access_failure_fraction: f64,
    pub read_failure_fraction: f64,
}

/// Runs the classification experiment per cell per trial: write 1 at
/// nominal voltage, read at `op`, raise back to nominal, read again. An
/// error at the undervolted read only is an access failure; an error at
/// both reads is a read failure. Fractions are over `cells * trials`.
pub fn classify_failures(
    block: &mut SramBlock,
    op: &OperatingPoint,
    trials: u64,
    stream: &mut ReadStream,
) -> Result<FailureClassReport> {
    if trials == 0 {
        return Err(Error::invalid("classify_failures requires trials >= 1"));
    }
    op.validate()?;
    let geom = *block.geometry();
    let nominal = OperatingPoint {
        voltage_mv: NOMINAL_VOLTAGE_MV,
        frequency_mhz: block.config.f_ref_mhz,
        temperature_c: block.config.t_ref_c,
    };
    let ones = vec![true; geom.cols as usize];
    let mut under = vec![false; geom.cols as usize];
    let mut restored = vec![false; geom.cols as usize];
    let mut access = 0u64;
    let mut read = 0u64;
    for _ in 0..trials {
        for row in 0..geom.rows {
            block.write_row(row, &ones)?;
            block.read_row_into(row, op, stream, &mut under);
            block.read_row_into(row, &nominal, stream, &mut restored);
            for col in 0..geom.cols as usize {
                let err3 = !under[col];
                let err5 = !restored[col];
                if err3 && !err5 {
                    access += 1;
                } else if err3 && err5 {
                    read += 1;
                }
            }
        }
    }
    let total = trials as f64 * geom.cells_per_block() as f64;
    Ok(FailureClassReport {
        voltage_mv: op.voltage_mv,
        trials,
        access_failure_fraction: access as f64 / total,
        read_failure_fraction: read as f64 / total,
    })
}
