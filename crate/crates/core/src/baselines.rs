//! Comparison generators: independent per-variable Gaussian sampling and
//! rejection approximate Bayesian computation.
//!
//! Both treat variables independently, which is exactly the structural
//! weakness the generative models address: neither can reproduce
//! cross-variable correlation or multi-modal structure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, HlsSample, VarKind, VariableSchema};
use crate::error::{Error, Result};
use crate::nn::SeededRng;

fn moments(corpus: &Corpus, name: &str) -> (f64, f64) {
    let n = corpus.samples.len() as f64;
    let mean = corpus.samples.iter().map(|s| s.values[name]).sum::<f64>() / n;
    let var = corpus
        .samples
        .iter()
        .map(|s| (s.values[name] - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn finish_value(v: f64, var: &VariableSchema) -> f64 {
    let mut v = v.clamp(var.min, var.max);
    if var.kind == VarKind::Integer {
        v = v.round().clamp(var.min, var.max);
    }
    v
}

fn draw_directives(
    corpus: &Corpus,
    rng: &mut SeededRng,
) -> Option<BTreeMap<String, BTreeMap<String, String>>> {
    let schema = corpus.directive_schema.as_ref()?;
    let mut out = BTreeMap::new();
    for d in &schema.directives {
        let mut settings = BTreeMap::new();
        for o in &d.options {
            let pick = rng.index(o.domain.len());
            settings.insert(o.name.clone(), o.domain[pick].clone());
        }
        out.insert(d.name.clone(), settings);
    }
    Some(out)
}

/// Fit an independent normal per variable and draw `n` samples, clamped to
/// the schema range; integer variables are rounded. Directive settings are
/// drawn uniformly from their domains.
pub fn gaussian_generate(corpus: &Corpus, n: usize, rng: &mut SeededRng) -> Result<Vec<HlsSample>> {
    if corpus.is_empty() {
        return Err(Error::Corpus("empty corpus".into()));
    }
    let fits: Vec<(f64, f64)> = corpus
        .variables
        .iter()
        .map(|v| moments(corpus, &v.name))
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = BTreeMap::new();
        for (var, &(mean, std)) in corpus.variables.iter().zip(&fits) {
            let v = mean + std * rng.normal();
            values.insert(var.name.clone(), finish_value(v, var));
        }
        out.push(HlsSample {
            project_id: format!("gaussian-{i}"),
            benchmark: None,
            values,
            directives: draw_directives(corpus, rng),
        });
    }
    Ok(out)
}

/// Rejection-ABC configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbcConfig {
    /// Half-width of the uniform prior, relative to each empirical statistic.
    pub prior_width: f64,
    /// Acceptance threshold on the normalized summary distance.
    pub epsilon: f64,
    /// Simulated draws per candidate parameter pair.
    pub sim_batch: usize,
    /// Candidate draws per variable before giving up.
    pub max_trials: usize,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            prior_width: 0.5,
            epsilon: 0.1,
            sim_batch: 256,
            max_trials: 100_000,
        }
    }
}

/// An accepted per-variable parameter pair and its achieved distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AbcFit {
    pub mu: f64,
    pub sigma: f64,
    pub distance: f64,
}

/// Rejection sampling per variable: draw (mu, sigma) from uniform priors
/// around the empirical moments, simulate, and accept when the RMS of the
/// z-normalized mean/std deviations falls within epsilon.
pub(crate) fn abc_fit(
    corpus: &Corpus,
    rng: &mut SeededRng,
    config: &AbcConfig,
) -> Result<Vec<AbcFit>> {
    let mut fits = Vec::with_capacity(corpus.variables.len());
    for var in &corpus.variables {
        let (mean, std) = moments(corpus, &var.name);
        let scale = if std > 0.0 { std } else { 1.0 };
        let mu_half = config.prior_width * mean.abs();
        let sigma_half = config.prior_width * std;
        let mut best: Option<AbcFit> = None;
        let mut accepted = None;
        for _ in 0..config.max_trials {
            let mu = rng.uniform_in(mean - mu_half, mean + mu_half);
            let sigma = rng
                .uniform_in(std - sigma_half, std + sigma_half)
                .max(0.0);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..config.sim_batch {
                let x = mu + sigma * rng.normal();
                sum += x;
                sq += x * x;
            }
            let m = config.sim_batch as f64;
            let sim_mean = sum / m;
            let sim_std = (sq / m - sim_mean * sim_mean).max(0.0).sqrt();
            let d_mean = (sim_mean - mean) / scale;
            let d_std = (sim_std - std) / scale;
            let distance = ((d_mean * d_mean + d_std * d_std) / 2.0).sqrt();
            let fit = AbcFit {
                mu,
                sigma,
                distance,
            };
            if best.is_none() || distance < best.unwrap().distance {
                best = Some(fit);
            }
            if distance <= config.epsilon {
                accepted = Some(fit);
                break;
            }
        }
        match accepted {
            Some(fit) => fits.push(fit),
            None => {
                return Err(Error::Corpus(format!(
                    "abc: no acceptance for variable {} in {} trials; \
                     smallest distance {:.6}",
                    var.name,
                    config.max_trials,
                    best.map(|b| b.distance).unwrap_or(f64::INFINITY)
                )))
            }
        }
    }
    Ok(fits)
}

/// ABC generation: fit per-variable (mu, sigma) by rejection, then sample
/// like the Gaussian baseline from the accepted parameters.
pub fn abc_generate(
    corpus: &Corpus,
    n: usize,
    rng: &mut SeededRng,
    config: &AbcConfig,
) -> Result<Vec<HlsSample>> {
    if corpus.is_empty() {
        return Err(Error::Corpus("empty corpus".into()));
    }
    let fits = abc_fit(corpus, rng, config)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = BTreeMap::new();
        for (var, fit) in corpus.variables.iter().zip(&fits) {
            let v = fit.mu + fit.sigma * rng.normal();
            values.insert(var.name.clone(), finish_value(v, var));
        }
        out.push(HlsSample {
            project_id: format!("abc-{i}"),
            benchmark: None,
            values,
            directives: draw_directives(corpus, rng),
        });
    }
    Ok(out)
}
