// Scratch driver for calibration exploration. Not part of the toolkit.

use turan::calibrate::evaluate;
use turan::fault::{FaultModelConfig, SramGeometry};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("probe");
    let geometry = SramGeometry::default();
    let fault = FaultModelConfig::default();

    match mode {
        "probe" => {
            let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
            let reads: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1000);
            let t0 = std::time::Instant::now();
            let report = evaluate(seed, geometry, &fault, reads, 50).unwrap();
            println!("evaluated seed {seed} in {:?}", t0.elapsed());
            println!(
                "classify@500mV: access {:.4} read {:.6}",
                report.classify_half_nominal.access_failure_fraction,
                report.classify_half_nominal.read_failure_fraction
            );
            println!("voltage curve (200 MHz):");
            for &(v, h) in &report.voltage_curve {
                println!("  {v:6.1} mV  {h:7.3} bits");
            }
            println!("peak: {:.3} bits at {} mV", report.peak_entropy_bits, report.peak_voltage_mv);
            println!("20 MHz curve:");
            for &(v, h) in &report.freq20_curve {
                println!("  {v:6.1} mV  {h:7.3} bits");
            }
            println!("patterns at peak:");
            for &(p, max, avg) in &report.pattern_entropies {
                println!("  {p:<3} max {max:7.3} avg {avg:7.3}");
            }
            println!("temp peaks: {:?}", report.temp_peak_voltages);
            for check in report.checks() {
                println!(
                    "  [{}] {}: {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!("all_pass = {}", report.all_pass());
        }
        "screen" => {
            // cheap 10-point voltage screen: unimodal + interior + band
            use turan::calibrate::{is_unimodal, unique_argmax};
            use turan::characterize::{sweep, voltage_range, DataPattern, SweepConfig};
            use turan::fault::build_block;
            let lo: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
            let hi: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
            let reads: u32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);
            for seed in lo..hi {
                let block = build_block(seed, geometry, fault).unwrap();
                let report = sweep(
                    &[block],
                    &SweepConfig {
                        voltages_mv: voltage_range(535.0, 580.0, 5.0),
                        frequencies_mhz: vec![200.0],
                        temperatures_c: vec![45.0],
                        patterns: vec![DataPattern::F],
                        reads_per_row: reads,
                        voltage_step_mv: 5.0,
                    },
                )
                .unwrap();
                let curve: Vec<f64> = report
                    .summaries
                    .iter()
                    .map(|s| s.max_block32_entropy)
                    .collect();
                let peak = report.max_block32_entropy;
                let interior = unique_argmax(&curve).map_or(false, |m| m > 0);
                let uni = is_unimodal(&curve);
                let band = (7.0..=9.5).contains(&peak);
                println!(
                    "seed {seed:4}: peak {peak:6.3} @ {:5.0} mV  interior={} unimodal={} band={} {}",
                    report.best_op.voltage_mv,
                    interior as u8,
                    uni as u8,
                    band as u8,
                    if interior && uni && band { "  <== CANDIDATE" } else { "" }
                );
            }
        }
        "search" => {
            let lo: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
            let hi: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
            let reads: u32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);
            for seed in lo..hi {
                let report = evaluate(seed, geometry, &fault, reads, 50).unwrap();
                let fails: Vec<String> = report
                    .checks()
                    .into_iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name)
                    .collect();
                println!(
                    "seed {seed:4}: peak {:6.3} @ {} mV, 20MHz {:6.3}, access {:.4} | {}",
                    report.peak_entropy_bits,
                    report.peak_voltage_mv,
                    report.peak20_entropy_bits,
                    report.classify_half_nominal.access_failure_fraction,
                    if fails.is_empty() { "ALL PASS".into() } else { fails.join(",") }
                );
                if fails.is_empty() {
                    break;
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
