//! Fidelity scoring of synthetic vs real bit-matrix sets.
//!
//! All four metrics operate on flattened bit vectors. MMD uses a Gaussian
//! RBF kernel with the median heuristic (2 sigma^2 = median of pooled
//! pairwise squared distances) and the unbiased estimator, clipped at zero
//! before the square root; on identical sets the clipped estimate is exactly
//! zero, and on independent draws from one distribution it stays near zero
//! instead of carrying the 1/n + 1/m bias of the V-statistic. SSD, PRD, and
//! COSS are computed over seeded random index alignment of the two sets.

use serde::{Deserialize, Serialize};

use crate::baselines::{abc_generate, gaussian_generate, AbcConfig};
use crate::codec::{self, BitMatrix, FixedPointFormat};
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::gan::{generate_gan, train_gan, DcganConfig};
use crate::nn::SeededRng;
use crate::vae::{generate_vae, train_vae, MlpVaeConfig};

/// One run's metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub mmd: f64,
    pub ssd: f64,
    pub prd: f64,
    pub coss: f64,
}

/// One epoch of a training trace: mean training loss plus a fidelity
/// snapshot from a fixed-size generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub loss: f64,
    #[serde(flatten)]
    pub metrics: MetricValues,
}

/// Multi-run metric aggregate: per-run values, mean, and sample standard
/// deviation per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub runs: usize,
    pub mean: MetricValues,
    pub std: MetricValues,
    pub per_run: Vec<MetricValues>,
}

impl FidelityReport {
    /// Aggregate per-run values; sample std (n-1), zero for a single run.
    pub fn from_runs(per_run: Vec<MetricValues>) -> Result<Self> {
        if per_run.is_empty() {
            return Err(Error::Metric("report needs at least one run".into()));
        }
        let n = per_run.len() as f64;
        let mean_of = |f: fn(&MetricValues) -> f64| per_run.iter().map(f).sum::<f64>() / n;
        let mean = MetricValues {
            mmd: mean_of(|m| m.mmd),
            ssd: mean_of(|m| m.ssd),
            prd: mean_of(|m| m.prd),
            coss: mean_of(|m| m.coss),
        };
        let std_of = |f: fn(&MetricValues) -> f64, mu: f64| {
            if per_run.len() < 2 {
                0.0
            } else {
                (per_run.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        };
        let std = MetricValues {
            mmd: std_of(|m| m.mmd, mean.mmd),
            ssd: std_of(|m| m.ssd, mean.ssd),
            prd: std_of(|m| m.prd, mean.prd),
            coss: std_of(|m| m.coss, mean.coss),
        };
        Ok(FidelityReport {
            runs: per_run.len(),
            mean,
            std,
            per_run,
        })
    }
}

/// Packed bit vectors of equal length, ready for Hamming arithmetic.
struct PackedSet {
    words: Vec<Vec<u64>>,
    bit_len: usize,
}

fn pack_set(set: &[BitMatrix]) -> Result<PackedSet> {
    if set.is_empty() {
        return Err(Error::Metric("empty sample set".into()));
    }
    let bit_len = set[0].rows() * set[0].cols();
    for m in set {
        if m.rows() * m.cols() != bit_len {
            return Err(Error::Metric(format!(
                "mismatched matrix sizes: {} vs {bit_len} bits",
                m.rows() * m.cols()
            )));
        }
    }
    Ok(PackedSet {
        words: set.iter().map(|m| m.packed_words()).collect(),
        bit_len,
    })
}

fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

fn popcount(a: &[u64]) -> u32 {
    a.iter().map(|x| x.count_ones()).sum()
}

/// Median of pooled pairwise squared distances (for binary vectors the
/// squared distance is the Hamming distance).
fn median_pairwise_sq(all: &[Vec<u64>]) -> f64 {
    let n = all.len();
    let mut dists: Vec<u32> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(hamming(&all[i], &all[j]));
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    let len = dists.len();
    let (lo_idx, hi_idx) = ((len - 1) / 2, len / 2);
    let (_, hi, _) = dists.select_nth_unstable(hi_idx);
    let hi = *hi;
    let lo = if lo_idx == hi_idx {
        hi
    } else {
        *dists[..hi_idx].iter().max().unwrap()
    };
    (lo as f64 + hi as f64) / 2.0
}

/// Maximum mean discrepancy between two sets of equally sized bit matrices.
/// Exactly symmetric: arguments are put in a canonical order before any
/// floating-point accumulation.
pub fn mmd(real: &[BitMatrix], synth: &[BitMatrix]) -> Result<f64> {
    let a = pack_set(real)?;
    let b = pack_set(synth)?;
    if a.bit_len != b.bit_len {
        return Err(Error::Metric(format!(
            "real and synthetic vectors differ in length: {} vs {}",
            a.bit_len, b.bit_len
        )));
    }
    let (x, y) = if a.words <= b.words { (a, b) } else { (b, a) };
    let mut pooled = x.words.clone();
    pooled.extend(y.words.iter().cloned());
    let mut two_sigma_sq = median_pairwise_sq(&pooled);
    if two_sigma_sq == 0.0 {
        // all points coincide; any positive bandwidth gives mmd = 0
        two_sigma_sq = 2.0;
    }
    let kernel = |a: &[u64], b: &[u64]| (-(hamming(a, b) as f64) / two_sigma_sq).exp();

    // within-set mean kernel, diagonal excluded (falls back to k(x,x) = 1
    // for singleton sets, where the unbiased form is undefined)
    let within = |s: &[Vec<u64>]| -> f64 {
        let n = s.len();
        if n < 2 {
            return 1.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += kernel(&s[i], &s[j]);
            }
        }
        2.0 * sum / (n as f64 * (n - 1) as f64)
    };
    let mut cross = 0.0;
    for a in &x.words {
        for b in &y.words {
            cross += kernel(a, b);
        }
    }
    cross /= (x.words.len() * y.words.len()) as f64;

    let estimate = within(&x.words) + within(&y.words) - 2.0 * cross;
    Ok(estimate.max(0.0).sqrt())
}

/// SSD / PRD / COSS over aligned pairs (no shuffling). The public entry
/// point shuffles both sets first.
fn paired_metrics_aligned(x: &PackedSet, y: &PackedSet, pairs: usize) -> Result<(f64, f64, f64)> {
    let mut ssd_sum = 0.0;
    let mut prd_sum = 0.0;
    let mut prd_count = 0usize;
    let mut coss_sum = 0.0;
    for i in 0..pairs {
        let (a, b) = (&x.words[i], &y.words[i]);
        let ssd = hamming(a, b) as f64;
        ssd_sum += ssd;
        let pop_a = popcount(a);
        let pop_b = popcount(b);
        if pop_a > 0 {
            prd_sum += 100.0 * (ssd / pop_a as f64).sqrt();
            prd_count += 1;
        }
        if pop_a > 0 && pop_b > 0 {
            let dot: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
            coss_sum += dot as f64 / (pop_a as f64 * pop_b as f64).sqrt();
        }
    }
    if prd_count == 0 {
        return Err(Error::Metric(
            "prd undefined: every real vector is all-zero".into(),
        ));
    }
    Ok((
        ssd_sum / pairs as f64,
        prd_sum / prd_count as f64,
        coss_sum / pairs as f64,
    ))
}

/// Pairwise SSD / PRD / COSS: both sets are shuffled by `rng`, truncated to
/// the shorter length, and scored over index-aligned pairs.
pub fn paired_metrics(
    real: &[BitMatrix],
    synth: &[BitMatrix],
    rng: &mut SeededRng,
) -> Result<(f64, f64, f64)> {
    let mut x = pack_set(real)?;
    let mut y = pack_set(synth)?;
    if x.bit_len != y.bit_len {
        return Err(Error::Metric(format!(
            "real and synthetic vectors differ in length: {} vs {}",
            x.bit_len, y.bit_len
        )));
    }
    rng.shuffle(&mut x.words);
    rng.shuffle(&mut y.words);
    let pairs = x.words.len().min(y.words.len());
    paired_metrics_aligned(&x, &y, pairs)
}

/// All four metrics in one pass.
pub fn score_sets(
    real: &[BitMatrix],
    synth: &[BitMatrix],
    rng: &mut SeededRng,
) -> Result<MetricValues> {
    let mmd = mmd(real, synth)?;
    let (ssd, prd, coss) = paired_metrics(real, synth, rng)?;
    Ok(MetricValues {
        mmd,
        ssd,
        prd,
        coss,
    })
}

/// A trainable or closed-form generator plus its configuration; the unit
/// the multi-run protocol evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    MlpVae(MlpVaeConfig),
    Dcgan(DcganConfig),
    Gaussian,
    Abc(AbcConfig),
    /// Emits the real data unchanged; noise-floor reference.
    Identity,
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::MlpVae(_) => "mlpvae",
            GeneratorSpec::Dcgan(_) => "dcgan",
            GeneratorSpec::Gaussian => "gaussian",
            GeneratorSpec::Abc(_) => "abc",
            GeneratorSpec::Identity => "identity",
        }
    }

    /// Train (when applicable) and emit `n` synthetic bit matrices for the
    /// corpus under `seed`.
    pub fn generate(&self, corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<BitMatrix>> {
        Ok(self.generate_full(corpus, n, seed)?.0)
    }

    /// Like [`GeneratorSpec::generate`], also returning the training
    /// artifacts (checkpoint with the corpus schema embedded, per-epoch
    /// trace) for generators that train a model.
    pub fn generate_full(
        &self,
        corpus: &Corpus,
        n: usize,
        seed: u64,
    ) -> Result<(Vec<BitMatrix>, GenerationArtifacts)> {
        let fmt = FixedPointFormat::default();
        let schema = crate::dataset::Schema::of_corpus(corpus);
        match self {
            GeneratorSpec::MlpVae(config) => {
                let bits = codec::encode_corpus(corpus, &fmt)?;
                let mut config = config.clone();
                config.seed = seed;
                let (model, trace) = train_vae(&bits, &config)?;
                let mut rng = SeededRng::new(seed ^ GENERATION_STREAM);
                let synth = generate_vae(&model, n, &mut rng);
                Ok((
                    synth,
                    GenerationArtifacts {
                        checkpoint: Some(model.to_checkpoint(Some(&schema))),
                        trace,
                    },
                ))
            }
            GeneratorSpec::Dcgan(config) => {
                let bits = codec::encode_corpus(corpus, &fmt)?;
                let mut config = config.clone();
                config.seed = seed;
                let (model, trace) = train_gan(&bits, &config)?;
                let mut rng = SeededRng::new(seed ^ GENERATION_STREAM);
                let synth = generate_gan(&model, n, &mut rng)?;
                Ok((
                    synth,
                    GenerationArtifacts {
                        checkpoint: Some(model.to_checkpoint(Some(&schema))),
                        trace,
                    },
                ))
            }
            GeneratorSpec::Gaussian => {
                let mut rng = SeededRng::new(seed);
                let samples = gaussian_generate(corpus, n, &mut rng)?;
                let synth = samples
                    .iter()
                    .map(|s| {
                        codec::encode_sample(
                            s,
                            &corpus.variables,
                            corpus.directive_schema.as_ref(),
                            &fmt,
                        )
                    })
                    .collect::<Result<_>>()?;
                Ok((synth, GenerationArtifacts::default()))
            }
            GeneratorSpec::Abc(config) => {
                let mut rng = SeededRng::new(seed);
                let samples = abc_generate(corpus, n, &mut rng, config)?;
                let synth = samples
                    .iter()
                    .map(|s| {
                        codec::encode_sample(
                            s,
                            &corpus.variables,
                            corpus.directive_schema.as_ref(),
                            &fmt,
                        )
                    })
                    .collect::<Result<_>>()?;
                Ok((synth, GenerationArtifacts::default()))
            }
            GeneratorSpec::Identity => {
                let bits = codec::encode_corpus(corpus, &fmt)?;
                Ok((
                    bits.iter().cycle().take(n).cloned().collect(),
                    GenerationArtifacts::default(),
                ))
            }
        }
    }
}

const GENERATION_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Pairing-shuffle stream: fixed per experiment (not per run), so identical
/// generator outputs across runs score identically while different
/// experiments still pair differently.
pub(crate) const PAIRING_STREAM: u64 = 0x517c_c1b7_2722_0a95;

/// Side products of a generation cycle.
#[derive(Debug, Clone, Default)]
pub struct GenerationArtifacts {
    pub checkpoint: Option<crate::nn::Checkpoint>,
    pub trace: Vec<EpochTrace>,
}

/// Run the multi-run evaluation protocol: one train/generate cycle per seed,
/// full-corpus-sized generation, aggregated mean and std per metric.
/// Independent runs execute concurrently; results are ordered by seed index.
pub fn evaluate_runs(
    spec: &GeneratorSpec,
    corpus: &Corpus,
    seeds: &[u64],
) -> Result<FidelityReport> {
    if seeds.is_empty() {
        return Err(Error::Metric("evaluate_runs needs at least one seed".into()));
    }
    let fmt = FixedPointFormat::default();
    let real_bits = codec::encode_corpus(corpus, &fmt)?;
    let n = real_bits.len();
    let pairing_seed = seeds[0] ^ PAIRING_STREAM;
    let mut per_run: Vec<Option<Result<MetricValues>>> = Vec::new();
    per_run.resize_with(seeds.len(), || None);
    std::thread::scope(|scope| {
        for (slot, &seed) in per_run.iter_mut().zip(seeds) {
            let real_bits = &real_bits;
            scope.spawn(move || {
                let result = spec.generate(corpus, n, seed).and_then(|synth| {
                    let mut rng = SeededRng::new(pairing_seed);
                    score_sets(real_bits, &synth, &mut rng)
                });
                *slot = Some(result);
            });
        }
    });
    let values: Result<Vec<MetricValues>> = per_run
        .into_iter()
        .map(|r| r.expect("run completed"))
        .collect();
    FidelityReport::from_runs(values?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_from_bits(bits: &[u8]) -> BitMatrix {
        BitMatrix::from_bits(1, bits.len(), bits.to_vec(), vec!["row".into()])
    }

    fn copies(bits: &[u8], n: usize) -> Vec<BitMatrix> {
        (0..n).map(|_| mat_from_bits(bits)).collect()
    }

    #[test]
    fn mmd_identical_sets_is_zero() {
        let mut rng = SeededRng::new(1);
        let set: Vec<BitMatrix> = (0..50)
            .map(|_| {
                let bits: Vec<u8> = (0..64).map(|_| (rng.uniform() < 0.5) as u8).collect();
                mat_from_bits(&bits)
            })
            .collect();
        assert_eq!(mmd(&set, &set).unwrap(), 0.0);
    }

    #[test]
    fn mmd_two_point_closed_form() {
        // 100 copies of 0000 vs 100 copies of 1111: pooled median squared
        // distance is 4, so k(x, y) = exp(-1) and mmd = sqrt(2 - 2/e).
        let x = copies(&[0, 0, 0, 0], 100);
        let y = copies(&[1, 1, 1, 1], 100);
        let got = mmd(&x, &y).unwrap();
        let expected = (2.0 - 2.0 * (-1.0f64).exp()).sqrt();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn mmd_is_symmetric() {
        let mut rng = SeededRng::new(9);
        let mut draw = |p: f64, n: usize| -> Vec<BitMatrix> {
            (0..n)
                .map(|_| {
                    let bits: Vec<u8> = (0..96).map(|_| (rng.uniform() < p) as u8).collect();
                    mat_from_bits(&bits)
                })
                .collect()
        };
        let x = draw(0.3, 40);
        let y = draw(0.6, 30);
        let a = mmd(&x, &y).unwrap();
        let b = mmd(&y, &x).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.1, "clearly different distributions, got {a}");
    }

    #[test]
    fn mmd_same_bernoulli_distribution_is_small() {
        // Two 500-sample draws from Bernoulli(0.3)^640 at seed 0.
        let mut rng = SeededRng::new(0);
        let mut draw = |n: usize| -> Vec<BitMatrix> {
            (0..n)
                .map(|_| {
                    let bits: Vec<u8> = (0..640).map(|_| (rng.uniform() < 0.3) as u8).collect();
                    mat_from_bits(&bits)
                })
                .collect()
        };
        let x = draw(500);
        let y = draw(500);
        let got = mmd(&x, &y).unwrap();
        assert!(got < 0.05, "null mmd too large: {got}");
    }

    #[test]
    fn mmd_degenerate_identical_points_uses_fallback_bandwidth() {
        let x = copies(&[1, 0, 1, 0], 5);
        let y = copies(&[1, 0, 1, 0], 7);
        assert_eq!(mmd(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn paired_hand_example() {
        let x = pack_set(&[mat_from_bits(&[1, 1, 0, 0])]).unwrap();
        let y = pack_set(&[mat_from_bits(&[1, 0, 1, 0])]).unwrap();
        let (ssd, prd, coss) = paired_metrics_aligned(&x, &y, 1).unwrap();
        assert_eq!(ssd, 2.0);
        assert_eq!(prd, 100.0);
        assert_eq!(coss, 0.5);
    }

    #[test]
    fn paired_identical_sets_identity_pairing() {
        let x = pack_set(&copies(&[1, 0, 1, 1, 0, 0, 1, 0], 10)).unwrap();
        let y = pack_set(&copies(&[1, 0, 1, 1, 0, 0, 1, 0], 10)).unwrap();
        let (ssd, prd, coss) = paired_metrics_aligned(&x, &y, 10).unwrap();
        assert_eq!(ssd, 0.0);
        assert_eq!(prd, 0.0);
        assert!((coss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paired_complement_has_zero_cosine() {
        let x = pack_set(&[mat_from_bits(&[1, 1, 0, 0])]).unwrap();
        let y = pack_set(&[mat_from_bits(&[0, 0, 1, 1])]).unwrap();
        let (ssd, _prd, coss) = paired_metrics_aligned(&x, &y, 1).unwrap();
        assert_eq!(ssd, 4.0);
        assert_eq!(coss, 0.0);
    }

    #[test]
    fn paired_all_zero_real_set_is_prd_error() {
        let x = copies(&[0, 0, 0, 0], 3);
        let y = copies(&[1, 0, 0, 0], 3);
        let mut rng = SeededRng::new(5);
        assert!(paired_metrics(&x, &y, &mut rng).is_err());
    }

    #[test]
    fn paired_truncates_to_shorter_set() {
        let x = copies(&[1, 0, 1, 0], 8);
        let y = copies(&[1, 0, 1, 0], 3);
        let mut rng = SeededRng::new(5);
        let (ssd, prd, coss) = paired_metrics(&x, &y, &mut rng).unwrap();
        assert_eq!((ssd, prd, coss), (0.0, 0.0, 1.0));
    }

    #[test]
    fn report_aggregation_mean_and_std() {
        let runs = vec![
            MetricValues {
                mmd: 0.1,
                ssd: 10.0,
                prd: 50.0,
                coss: 0.9,
            },
            MetricValues {
                mmd: 0.3,
                ssd: 20.0,
                prd: 70.0,
                coss: 0.7,
            },
        ];
        let report = FidelityReport::from_runs(runs).unwrap();
        assert!((report.mean.mmd - 0.2).abs() < 1e-15);
        // sample std of {0.1, 0.3} is sqrt(0.02)
        assert!((report.std.mmd - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_run_report_has_zero_std() {
        let report = FidelityReport::from_runs(vec![MetricValues {
            mmd: 0.5,
            ssd: 1.0,
            prd: 2.0,
            coss: 0.3,
        }])
        .unwrap();
        assert_eq!(report.std.mmd, 0.0);
        assert_eq!(report.runs, 1);
    }
}
