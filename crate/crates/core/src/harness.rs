//! Experiment orchestration: multi-run configs, per-run artifact trees, and
//! comparison tables.
//!
//! Output layout under the experiment directory:
//!   run<k>/checkpoint   model checkpoint (trainable generators only)
//!   run<k>/trace.csv    per-epoch metrics: epoch, mmd, ssd, prd, coss, loss
//!   report              JSON experiment report
//!
//! Every file is byte-reproducible for a given config: no timestamps, stable
//! field order, shortest round-trip float formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{self, FixedPointFormat};
use crate::dataset::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::fidelity::{
    score_sets, EpochTrace, FidelityReport, GeneratorSpec, MetricValues,
};
use crate::nn::{write_checkpoint, SeededRng};

/// One experiment: a corpus, a generator, and a run count.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_csv: PathBuf,
    pub schema_path: PathBuf,
    pub generator: GeneratorSpec,
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
}

/// The on-disk experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub generator: String,
    pub generator_spec: GeneratorSpec,
    pub corpus_digest: String,
    pub samples: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub fidelity: FidelityReport,
}

/// FNV-1a over the packed corpus bits; identifies a corpus across reports.
pub fn corpus_digest(corpus: &Corpus) -> Result<String> {
    let fmt = FixedPointFormat::default();
    let matrices = codec::encode_corpus(corpus, &fmt)?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for m in &matrices {
        for &d in &[m.rows() as u64, m.cols() as u64] {
            for b in d.to_le_bytes() {
                eat(b);
            }
        }
        for word in m.packed_words() {
            for b in word.to_le_bytes() {
                eat(b);
            }
        }
    }
    Ok(format!("{hash:016x}"))
}

fn render_trace_csv(trace: &[EpochTrace]) -> String {
    let mut out = String::from("epoch,mmd,ssd,prd,coss,loss\n");
    for t in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.epoch, t.metrics.mmd, t.metrics.ssd, t.metrics.prd, t.metrics.coss, t.loss
        ));
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Execute the runs of an experiment over an already loaded corpus, writing
/// per-run artifacts and the final report under `out_dir`. Partial outputs
/// are removed when a freshly created directory fails mid-way.
pub fn run_experiment_on(
    corpus: &Corpus,
    generator: &GeneratorSpec,
    runs: usize,
    base_seed: u64,
    out_dir: &Path,
) -> Result<ExperimentReport> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let created_fresh = !out_dir.exists();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let result = run_experiment_inner(corpus, generator, runs, base_seed, out_dir);
    if result.is_err() && created_fresh {
        let _ = fs::remove_dir_all(out_dir);
    }
    result
}

fn run_experiment_inner(
    corpus: &Corpus,
    generator: &GeneratorSpec,
    runs: usize,
    base_seed: u64,
    out_dir: &Path,
) -> Result<ExperimentReport> {
    let fmt = FixedPointFormat::default();
    let real_bits = codec::encode_corpus(corpus, &fmt)?;
    let n = real_bits.len();
    let seeds: Vec<u64> = (0..runs as u64).map(|k| base_seed + k).collect();
    let pairing_seed = base_seed ^ crate::fidelity::PAIRING_STREAM;

    let mut outcomes: Vec<Option<Result<MetricValues>>> = Vec::new();
    outcomes.resize_with(runs, || None);
    std::thread::scope(|scope| {
        for (k, (slot, &seed)) in outcomes.iter_mut().zip(&seeds).enumerate() {
            let real_bits = &real_bits;
            let run_dir = out_dir.join(format!("run{k}"));
            scope.spawn(move || {
                *slot = Some(execute_run(
                    corpus, generator, n, seed, pairing_seed, &run_dir, real_bits,
                ));
            });
        }
    });
    let per_run: Result<Vec<MetricValues>> = outcomes
        .into_iter()
        .map(|r| r.expect("run completed"))
        .collect();
    let fidelity = FidelityReport::from_runs(per_run?)?;

    let report = ExperimentReport {
        generator: generator.name().to_string(),
        generator_spec: generator.clone(),
        corpus_digest: corpus_digest(corpus)?,
        samples: corpus.len(),
        base_seed,
        seeds,
        fidelity,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    write_text(&out_dir.join("report"), &(json + "\n"))?;
    Ok(report)
}

fn execute_run(
    corpus: &Corpus,
    generator: &GeneratorSpec,
    n: usize,
    seed: u64,
    pairing_seed: u64,
    run_dir: &Path,
    real_bits: &[codec::BitMatrix],
) -> Result<MetricValues> {
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir.display().to_string(), e))?;
    let (synth, artifacts) = generator.generate_full(corpus, n, seed)?;
    if let Some(ckpt) = &artifacts.checkpoint {
        write_checkpoint(&run_dir.join("checkpoint"), ckpt)?;
    }
    write_text(&run_dir.join("trace.csv"), &render_trace_csv(&artifacts.trace))?;
    let mut rng = SeededRng::new(pairing_seed);
    score_sets(real_bits, &synth, &mut rng)
}

/// Load the corpus named by the config and run the experiment.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let corpus = load_corpus(&cfg.corpus_csv, &cfg.schema_path)?;
    run_experiment_on(
        &corpus,
        &cfg.generator,
        cfg.runs,
        cfg.base_seed,
        &cfg.out_dir,
    )
}

/// Parse a report file back.
pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("report parse: {e}")))
}

/// Render the mean±std comparison grid for reports over one corpus; the best
/// value per column is flagged with `*` (max for COSS, min otherwise), ties
/// flagged on every tied row.
pub fn compare_table(reports: &[ExperimentReport]) -> Result<String> {
    if reports.len() < 2 {
        return Err(Error::Config(
            "comparison needs at least two reports".into(),
        ));
    }
    let digest = &reports[0].corpus_digest;
    for r in reports {
        if &r.corpus_digest != digest {
            return Err(Error::Config(format!(
                "reports cover different corpora: {} vs {}",
                r.corpus_digest, digest
            )));
        }
    }

    let columns: [(&str, fn(&MetricValues) -> f64, bool); 4] = [
        ("MMD", |m| m.mmd, false),
        ("SSD", |m| m.ssd, false),
        ("PRD%", |m| m.prd, false),
        ("COSS", |m| m.coss, true),
    ];
    let best: Vec<f64> = columns
        .iter()
        .map(|(_, get, higher_better)| {
            let values = reports.iter().map(|r| get(&r.fidelity.mean));
            if *higher_better {
                values.fold(f64::NEG_INFINITY, f64::max)
            } else {
                values.fold(f64::INFINITY, f64::min)
            }
        })
        .collect();

    let mut out = format!("{:<12}", "generator");
    for (name, _, _) in &columns {
        out.push_str(&format!(" {:>16}", name));
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{:<12}", r.generator));
        for ((_, get, _), &best_value) in columns.iter().zip(&best) {
            let mean = get(&r.fidelity.mean);
            let std = get(&r.fidelity.std);
            let flag = if mean == best_value { "*" } else { " " };
            out.push_str(&format!("{flag}{:>9.3}±{:<6.3}", mean, std));
        }
        out.push('\n');
    }
    Ok(out)
}
