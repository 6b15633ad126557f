//! Deterministic synthetic fixtures for evaluation and testing.
//!
//! Real HLS result tables are not redistributable, so the evaluation
//! protocol runs on generated ground truth with the structure that matters:
//! cross-variable correlation, multiple modes, and trade-off curves that
//! independent per-variable samplers cannot reproduce.

use std::collections::BTreeMap;

use crate::dataset::{Corpus, HlsSample, VarKind, VariableSchema};
use crate::dse::{Component, DesignAlternative, SystemSpec};
use crate::nn::SeededRng;

/// The 20 report/implementation metrics commonly exported per design point.
pub fn report_variables() -> Vec<VariableSchema> {
    let spec: [(&str, &str, VarKind); 20] = [
        ("Clk-estimated", "ns", VarKind::Real),
        ("BRAM", "count", VarKind::Integer),
        ("DSP", "count", VarKind::Integer),
        ("FF", "count", VarKind::Integer),
        ("LUT", "count", VarKind::Integer),
        ("c-num-arith", "count", VarKind::Integer),
        ("c-num-logic", "count", VarKind::Integer),
        ("rtl-num-arith", "count", VarKind::Integer),
        ("rtl-num-logic", "count", VarKind::Integer),
        ("input-port", "count", VarKind::Integer),
        ("output-port", "count", VarKind::Integer),
        ("DP", "mW", VarKind::Real),
        ("Total LUTs", "count", VarKind::Integer),
        ("Logic LUTs", "count", VarKind::Integer),
        ("LUTRAMs", "count", VarKind::Integer),
        ("SRLs", "count", VarKind::Integer),
        ("FFs", "count", VarKind::Integer),
        ("RAMB36", "count", VarKind::Integer),
        ("RAMB18", "count", VarKind::Integer),
        ("DSP48", "count", VarKind::Integer),
    ];
    spec.iter()
        .map(|(name, unit, kind)| VariableSchema {
            name: name.to_string(),
            unit: unit.to_string(),
            kind: *kind,
            min: 0.0,
            max: crate::dataset::default_max_value(),
        })
        .collect()
}

struct BimodalVar {
    name: &'static str,
    kind: VarKind,
    center_low: f64,
    center_high: f64,
    spread: f64,
}

const BIMODAL_VARS: [BimodalVar; 6] = [
    BimodalVar {
        name: "cycles",
        kind: VarKind::Integer,
        center_low: 2000.0,
        center_high: 12000.0,
        spread: 0.08,
    },
    BimodalVar {
        name: "area_ff",
        kind: VarKind::Integer,
        center_low: 900.0,
        center_high: 5200.0,
        spread: 0.08,
    },
    BimodalVar {
        name: "area_lut",
        kind: VarKind::Integer,
        center_low: 1500.0,
        center_high: 8800.0,
        spread: 0.08,
    },
    BimodalVar {
        name: "power",
        kind: VarKind::Real,
        center_low: 35.0,
        center_high: 140.0,
        spread: 0.06,
    },
    BimodalVar {
        name: "bram",
        kind: VarKind::Integer,
        center_low: 4.0,
        center_high: 24.0,
        spread: 0.10,
    },
    BimodalVar {
        name: "clk_est",
        kind: VarKind::Real,
        center_low: 4.1,
        center_high: 8.3,
        spread: 0.05,
    },
];

/// Ground-truth corpus from a correlated bimodal distribution: each sample
/// sits in a low or high mode (fair coin) and all six variables co-move
/// through a shared within-mode factor (correlation 0.8). A per-variable
/// normal fit cannot represent either the modes or the coupling.
pub fn bimodal_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = SeededRng::new(seed);
    let variables: Vec<VariableSchema> = BIMODAL_VARS
        .iter()
        .map(|v| VariableSchema {
            name: v.name.to_string(),
            unit: String::new(),
            kind: v.kind,
            min: 0.0,
            max: crate::dataset::default_max_value(),
        })
        .collect();
    let samples: Vec<HlsSample> = (0..n)
        .map(|i| {
            let high = rng.uniform() < 0.5;
            let shared = rng.normal();
            let mut values = BTreeMap::new();
            for v in &BIMODAL_VARS {
                let eps = rng.normal();
                let w = (0.8 * shared + 0.6 * eps).clamp(-3.0, 3.0);
                let center = if high { v.center_high } else { v.center_low };
                let mut value = center * (1.0 + v.spread * w);
                if v.kind == VarKind::Integer {
                    value = value.round();
                }
                values.insert(v.name.to_string(), value.max(0.0));
            }
            HlsSample {
                project_id: format!("bimodal-{i}"),
                benchmark: None,
                values,
                directives: None,
            }
        })
        .collect();
    Corpus::new(variables, None, samples, "synthetic-bimodal".into())
        .expect("fixture corpus is valid by construction")
}

/// Three-component system whose alternatives lie on smooth trade-off curves:
/// cycles fall while area and power rise, clock periods cycle through three
/// values, and deadlines cut off the slowest period/cycle combinations. The
/// Pareto-relevant structure lives in the joint distribution.
pub fn tradeoff_system(seed: u64) -> SystemSpec {
    let mut rng = SeededRng::new(seed);
    let scales = [1.0, 1.3, 1.6];
    let periods = [10.0, 20.0 / 3.0, 5.0];
    let base_cycles = 1200.0;
    let base_lut = 2400.0;
    let base_ff = 1500.0;
    let base_power = 60.0;
    let alternatives_per_component = 20;

    let components = scales
        .iter()
        .enumerate()
        .map(|(ci, &s)| {
            let alternatives = (0..alternatives_per_component)
                .map(|i| {
                    let t = i as f64 / (alternatives_per_component - 1) as f64;
                    let jitter = |rng: &mut SeededRng| 1.0 + 0.03 * (2.0 * rng.uniform() - 1.0);
                    let cycles = (s * base_cycles * (3.0 - 2.6 * t) * jitter(&mut rng)).round();
                    let area_lut = (s * base_lut * (1.0 + 1.5 * t) * jitter(&mut rng)).round();
                    let area_ff = (s * base_ff * (1.0 + 1.5 * t) * jitter(&mut rng)).round();
                    let power = s * base_power * (0.9 + 0.2 * t) * jitter(&mut rng);
                    let clock_period = periods[i % periods.len()];
                    let critical_path = clock_period * (0.75 + 0.1 * rng.uniform());
                    DesignAlternative {
                        cycles: cycles as u64,
                        area_ff: area_ff as u64,
                        area_lut: area_lut as u64,
                        critical_path,
                        power,
                        clock_period,
                    }
                })
                .collect();
            Component {
                name: format!("component{ci}"),
                deadline: s * base_cycles * 22.0,
                alternatives,
            }
        })
        .collect();
    SystemSpec {
        components,
        max_distinct_frequencies: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::{brute_force_explore, evaluate_config, Evaluation, SystemConfiguration};

    #[test]
    fn bimodal_corpus_is_valid_and_bimodal() {
        let corpus = bimodal_corpus(500, 42);
        assert_eq!(corpus.len(), 500);
        let cycles: Vec<f64> = corpus.samples.iter().map(|s| s.values["cycles"]).collect();
        let low = cycles.iter().filter(|&&c| c < 5000.0).count();
        let high = cycles.iter().filter(|&&c| c > 9000.0).count();
        assert_eq!(low + high, 500, "no samples between the modes");
        assert!(low > 150 && high > 150, "modes are roughly balanced");
    }

    #[test]
    fn bimodal_corpus_is_deterministic() {
        assert_eq!(bimodal_corpus(50, 7), bimodal_corpus(50, 7));
    }

    #[test]
    fn bimodal_variables_are_correlated_within_mode() {
        let corpus = bimodal_corpus(2000, 1);
        // within the low mode, cycles and power should co-move
        let low: Vec<(&f64, &f64)> = corpus
            .samples
            .iter()
            .filter(|s| s.values["cycles"] < 5000.0)
            .map(|s| (&s.values["cycles"], &s.values["power"]))
            .collect();
        let n = low.len() as f64;
        let mx = low.iter().map(|(a, _)| **a).sum::<f64>() / n;
        let my = low.iter().map(|(_, b)| **b).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (a, b) in &low {
            cov += (**a - mx) * (**b - my);
            vx += (**a - mx).powi(2);
            vy += (**b - my).powi(2);
        }
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr > 0.4, "within-mode correlation {corr}");
    }

    #[test]
    fn tradeoff_system_is_valid_with_feasible_and_infeasible_points() {
        let spec = tradeoff_system(5);
        spec.validate().unwrap();
        assert_eq!(spec.config_count(), 8000);
        let front = brute_force_explore(&spec).unwrap();
        assert!(front.len() >= 5, "front size {}", front.len());
        // the slowest alternative at the longest period misses its deadline
        let worst = SystemConfiguration {
            choice: vec![0, 0, 0],
        };
        assert!(matches!(
            evaluate_config(&worst, &spec).unwrap(),
            Evaluation::Infeasible { .. }
        ));
    }

    #[test]
    fn tradeoff_system_is_deterministic() {
        assert_eq!(tradeoff_system(3), tradeoff_system(3));
    }
}
