//! Continuous-time dynamic topic model with a fixed number of topics.
//!
//! Each topic-word natural parameter follows Brownian motion in real-valued
//! time, observed through variational pseudo-observations. The variational
//! family factorizes into one Gaussian chain per (topic, word), a Dirichlet per
//! document mixture and a categorical per token:
//!
//! ```text
//! q = Π_k Π_w q(β_{1:T,k,w} | β̂_{1:T,k,w}) × Π_t Π_{d∈t} q(θ_d | γ_d) Π_n q(z_{d,n} | φ_{d,n})
//! ```
//!
//! `q(β_{·,k,w})` is the Kalman-smoothed posterior of the chain given the
//! pseudo-observations `β̂` with per-epoch variances `ν̂²`. Word probabilities
//! use the softmax link with a first-order variance correction.
//!
//! Fitting is coordinate ascent on the evidence lower bound: a mean-field
//! E-step per document, then one backtracking gradient step on `β̂`.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::corpus::{days_since_epoch, Corpus};
use crate::lda::{self, LdaParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error)]
pub enum DynTopicError {
    #[error("times must be strictly increasing (index {0})")]
    NonMonotoneTimes(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("line search stalled: step size fell below 1e-12")]
    ConvergenceStall,
    #[error("initialization failed: {0}")]
    Init(#[from] lda::LdaError),
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// A Gaussian pseudo-observation of one chain at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Log marginal likelihood of the observations.
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOutput {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

fn check_times(times: &[f64]) -> Result<(), DynTopicError> {
    for i in 1..times.len() {
        if !(times[i] > times[i - 1]) {
            return Err(DynTopicError::NonMonotoneTimes(i));
        }
    }
    Ok(())
}

/// Forward pass of a scalar random walk with process variance
/// `sigma2_rate · Δt` between consecutive times and prior `N(0, v0)` at the
/// first time. `None` entries are times without an observation.
pub fn kalman_forward(
    observations: &[Option<Observation>],
    times: &[f64],
    sigma2_rate: f64,
    v0: f64,
) -> Result<FilterOutput, DynTopicError> {
    if observations.len() != times.len() {
        return Err(DynTopicError::LengthMismatch(format!(
            "{} observations for {} times",
            observations.len(),
            times.len()
        )));
    }
    check_times(times)?;
    if !(sigma2_rate >= 0.0 && v0 > 0.0) {
        return Err(DynTopicError::Argument("need sigma2_rate >= 0 and v0 > 0".into()));
    }
    let n = times.len();
    let mut means = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    let mut log_likelihood = 0.0;
    let (mut mean, mut var) = (0.0, v0);
    for (i, obs) in observations.iter().enumerate() {
        if i > 0 {
            var += sigma2_rate * (times[i] - times[i - 1]);
        }
        if let Some(obs) = obs {
            if !(obs.variance > 0.0) {
                return Err(DynTopicError::Argument(format!(
                    "observation variance at index {i} must be positive"
                )));
            }
            let s = var + obs.variance;
            let resid = obs.value - mean;
            log_likelihood -= 0.5 * (LN_2PI + s.ln() + resid * resid / s);
            let gain = var / s;
            mean += gain * resid;
            var = var * obs.variance / s;
        }
        means.push(mean);
        variances.push(var);
    }
    Ok(FilterOutput { means, variances, log_likelihood })
}

/// Rauch-Tung-Striebel backward pass over a filtered chain.
pub fn kalman_smooth(
    filtered: &FilterOutput,
    times: &[f64],
    sigma2_rate: f64,
) -> Result<SmoothOutput, DynTopicError> {
    let n = times.len();
    if filtered.means.len() != n || filtered.variances.len() != n {
        return Err(DynTopicError::LengthMismatch(format!(
            "filtered chain has {} steps for {} times",
            filtered.means.len(),
            n
        )));
    }
    check_times(times)?;
    let mut means = filtered.means.clone();
    let mut variances = filtered.variances.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        let predicted = filtered.variances[i] + sigma2_rate * (times[i + 1] - times[i]);
        if predicted <= 0.0 {
            continue;
        }
        let gain = filtered.variances[i] / predicted;
        means[i] = filtered.means[i] + gain * (means[i + 1] - filtered.means[i]);
        variances[i] = filtered.variances[i] + gain * gain * (variances[i + 1] - predicted);
    }
    Ok(SmoothOutput { means, variances })
}

/// `π_w ∝ exp(m_w + V_w / 2)`, computed with max subtraction.
pub fn expected_word_probs(means: &[f64], variances: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = means.iter().zip(variances).map(|(m, v)| m + 0.5 * v).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Documents grouped into epochs placed at real-valued times.
#[derive(Debug, Clone, PartialEq)]
pub struct Epochs {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// Corpus document indexes per epoch; may be empty.
    pub docs: Vec<Vec<usize>>,
}

impl Epochs {
    pub fn new(times: Vec<f64>, labels: Vec<String>, docs: Vec<Vec<usize>>) -> Result<Self, DynTopicError> {
        if times.len() != docs.len() || times.len() != labels.len() {
            return Err(DynTopicError::LengthMismatch("epoch times, labels and docs".into()));
        }
        check_times(&times)?;
        Ok(Self { times, labels, docs })
    }

    /// One epoch per calendar month that has documents, placed at mid-month.
    pub fn monthly(corpus: &Corpus) -> Self {
        let mut months: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
        for (d, doc) in corpus.documents.iter().enumerate() {
            months.entry((doc.date.year(), doc.date.month())).or_default().push(d);
        }
        let mut times = Vec::new();
        let mut labels = Vec::new();
        let mut docs = Vec::new();
        for ((y, m), ids) in months {
            let start = NaiveDate::from_ymd_opt(y, m, 1).unwrap();
            let next = if m == 12 {
                NaiveDate::from_ymd_opt(y + 1, 1, 1).unwrap()
            } else {
                NaiveDate::from_ymd_opt(y, m + 1, 1).unwrap()
            };
            times.push(0.5 * (days_since_epoch(start) + days_since_epoch(next)));
            labels.push(format!("{y:04}-{m:02}"));
            docs.push(ids);
        }
        Self { times, labels, docs }
    }

    /// All documents in a single epoch at time 0.
    pub fn single(corpus: &Corpus) -> Self {
        Self {
            times: vec![0.0],
            labels: vec!["all".into()],
            docs: vec![(0..corpus.num_docs()).collect()],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdtmParams {
    pub k: usize,
    pub alpha: f64,
    /// Brownian variance per day.
    pub sigma2_rate: f64,
    /// Prior variance of the first epoch.
    pub v0: f64,
    pub max_iters: usize,
    /// ELBO improvement below which fitting stops.
    pub tol: f64,
    pub seed: u64,
    /// Gibbs sweeps of the static fit used for initialization.
    pub init_sweeps: usize,
}

impl CdtmParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            sigma2_rate: 1e-4,
            v0: 1.0,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            init_sweeps: 100,
        }
    }

    fn validate(&self) -> Result<(), DynTopicError> {
        if self.k < 1 {
            return Err(DynTopicError::Argument("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.v0 > 0.0 && self.sigma2_rate >= 0.0) {
            return Err(DynTopicError::Argument(
                "need alpha > 0, v0 > 0, sigma2_rate >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Shape and priors shared by every piece of the variational computation.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub corpus: &'a Corpus,
    pub epochs: &'a Epochs,
    pub k: usize,
    pub alpha: f64,
    pub sigma2_rate: f64,
    pub v0: f64,
}

impl Problem<'_> {
    fn n_words(&self) -> usize {
        self.corpus.vocab_size()
    }

    fn n_times(&self) -> usize {
        self.epochs.len()
    }

    /// Flat index of `(t, k, w)`.
    fn at(&self, t: usize, k: usize, w: usize) -> usize {
        (t * self.k + k) * self.n_words() + w
    }

    fn len(&self) -> usize {
        self.n_times() * self.k * self.n_words()
    }

    fn validate(&self, state: &VariationalState) -> Result<(), DynTopicError> {
        if self.epochs.is_empty() {
            return Err(DynTopicError::Argument("need at least one epoch".into()));
        }
        check_times(&self.epochs.times)?;
        let n = self.len();
        if state.beta_hat.len() != n || state.obs_var.len() != n {
            return Err(DynTopicError::LengthMismatch(format!(
                "pseudo-observations have {} entries, expected {n}",
                state.beta_hat.len()
            )));
        }
        if state.gamma.len() != self.corpus.num_docs() || state.phi.len() != self.corpus.num_docs() {
            return Err(DynTopicError::LengthMismatch("per-document parameters".into()));
        }
        Ok(())
    }
}

/// Variational parameters. Arrays indexed `(t, k, w)` are flat, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    /// Pseudo-observations `β̂`.
    pub beta_hat: Vec<f64>,
    /// Pseudo-observation variances `ν̂²`; infinite where an epoch has no
    /// documents and therefore no observation.
    pub obs_var: Vec<f64>,
    /// Per document, `n_d × K` token responsibilities `φ`.
    pub phi: Vec<Vec<f64>>,
    /// Per document Dirichlet parameters `γ`.
    pub gamma: Vec<Vec<f64>>,
    /// Token count per epoch.
    pub tokens_per_epoch: Vec<usize>,
}

impl VariationalState {
    /// Relabels topics: new topic `i` is old topic `perm[i]`.
    pub fn permute_topics(&self, problem: &Problem, perm: &[usize]) -> Self {
        let k = problem.k;
        let mut out = self.clone();
        for t in 0..problem.n_times() {
            for (new, &old) in perm.iter().enumerate() {
                for w in 0..problem.n_words() {
                    out.beta_hat[problem.at(t, new, w)] = self.beta_hat[problem.at(t, old, w)];
                    out.obs_var[problem.at(t, new, w)] = self.obs_var[problem.at(t, old, w)];
                }
            }
        }
        for (d, phi) in self.phi.iter().enumerate() {
            for n in 0..phi.len() / k {
                for (new, &old) in perm.iter().enumerate() {
                    out.phi[d][n * k + new] = phi[n * k + old];
                }
            }
            for (new, &old) in perm.iter().enumerate() {
                out.gamma[d][new] = self.gamma[d][old];
            }
        }
        out
    }
}

/// Smoothed natural parameters for every chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPosterior {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// `Σ_chains E_q[log p(β)] − E_q[log q(β)]`.
    pub neg_kl: f64,
}

fn chain_observations(problem: &Problem, values: &[f64], obs_var: &[f64], k: usize, w: usize) -> Vec<Option<Observation>> {
    (0..problem.n_times())
        .map(|t| {
            let i = problem.at(t, k, w);
            obs_var[i]
                .is_finite()
                .then(|| Observation { value: values[i], variance: obs_var[i] })
        })
        .collect()
}

/// Runs filter and smoother on every (topic, word) chain.
pub fn chain_posterior(
    problem: &Problem,
    beta_hat: &[f64],
    obs_var: &[f64],
) -> Result<ChainPosterior, DynTopicError> {
    let n = problem.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut neg_kl = 0.0;
    let times = &problem.epochs.times;
    for k in 0..problem.k {
        for w in 0..problem.n_words() {
            let obs = chain_observations(problem, beta_hat, obs_var, k, w);
            let filtered = kalman_forward(&obs, times, problem.sigma2_rate, problem.v0)?;
            let smoothed = kalman_smooth(&filtered, times, problem.sigma2_rate)?;
            // E_q[log p(β) − log q(β)] = log p(β̂) − E_q[log p(β̂ | β)]
            let mut expected_obs_ll = 0.0;
            for (t, o) in obs.iter().enumerate() {
                let i = problem.at(t, k, w);
                m[i] = smoothed.means[t];
                v[i] = smoothed.variances[t];
                if let Some(o) = o {
                    let r = o.value - m[i];
                    expected_obs_ll -= 0.5 * (LN_2PI + o.variance.ln() + (r * r + v[i]) / o.variance);
                }
            }
            neg_kl += filtered.log_likelihood - expected_obs_ll;
        }
    }
    Ok(ChainPosterior { m, v, neg_kl })
}

/// Per (epoch, topic): `ℓ_w = m_w − log Σ_v exp(m_v + V_v/2)`, the bound on
/// `E_q[log softmax(β)_w]` that the ELBO uses.
pub fn log_word_weights(problem: &Problem, posterior: &ChainPosterior) -> Vec<f64> {
    let nw = problem.n_words();
    let mut out = vec![0.0; problem.len()];
    for t in 0..problem.n_times() {
        for k in 0..problem.k {
            let base = problem.at(t, k, 0);
            let m = &posterior.m[base..base + nw];
            let v = &posterior.v[base..base + nw];
            let log_zeta = log_sum_exp(m.iter().zip(v).map(|(a, b)| a + 0.5 * b));
            for w in 0..nw {
                out[base + w] = m[w] - log_zeta;
            }
        }
    }
    out
}

/// Result of the mean-field updates for one epoch's documents.
#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub phi: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// Expected topic-word counts, `K × N` row-major.
    pub counts: Vec<f64>,
}

const ESTEP_TOL: f64 = 1e-6;
const ESTEP_MAX_ROUNDS: usize = 100;

fn e_step_doc(tokens: &[u32], log_weights: &[f64], k: usize, nw: usize, alpha: f64, gamma: &mut [f64], phi: &mut Vec<f64>) {
    phi.resize(tokens.len() * k, 0.0);
    if tokens.is_empty() {
        gamma.iter_mut().for_each(|g| *g = alpha);
        return;
    }
    let mut dig = vec![0.0; k];
    let mut next = vec![0.0; k];
    for _ in 0..ESTEP_MAX_ROUNDS {
        for (d, &g) in dig.iter_mut().zip(gamma.iter()) {
            *d = digamma(g);
        }
        next.iter_mut().for_each(|g| *g = alpha);
        for (n, &w) in tokens.iter().enumerate() {
            let row = &mut phi[n * k..(n + 1) * k];
            for t in 0..k {
                row[t] = dig[t] + log_weights[t * nw + w as usize];
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                row.iter_mut().for_each(|p| *p = 1.0 / k as f64);
            } else {
                let mut total = 0.0;
                for p in row.iter_mut() {
                    *p = (*p - max).exp();
                    total += *p;
                }
                row.iter_mut().for_each(|p| *p /= total);
            }
            for t in 0..k {
                next[t] += row[t];
            }
        }
        let change = gamma.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma.copy_from_slice(&next);
        if change < ESTEP_TOL {
            break;
        }
    }
}

/// Mean-field updates `φ_nk ∝ exp(ψ(γ_k)) · weight[k][w_n]`,
/// `γ_k = α + Σ_n φ_nk`, iterated to convergence for each document.
///
/// `word_weights` holds one nonnegative row per topic (the epoch's expected
/// word probabilities, or the bound-consistent weights used during fitting).
/// `warm_gamma` restarts each document from previous parameters.
pub fn e_step_epoch(
    docs: &[&[u32]],
    word_weights: &[Vec<f64>],
    alpha: f64,
    warm_gamma: Option<&[Vec<f64>]>,
) -> EStep {
    let k = word_weights.len();
    let nw = word_weights.first().map_or(0, Vec::len);
    let log_weights: Vec<f64> = word_weights.iter().flatten().map(|p| p.ln()).collect();
    let mut out = EStep { phi: Vec::with_capacity(docs.len()), gamma: Vec::with_capacity(docs.len()), counts: vec![0.0; k * nw] };
    for (i, tokens) in docs.iter().enumerate() {
        let mut gamma = match warm_gamma {
            Some(g) => g[i].clone(),
            None => vec![alpha + tokens.len() as f64 / k as f64; k],
        };
        let mut phi = Vec::new();
        e_step_doc(tokens, &log_weights, k, nw, alpha, &mut gamma, &mut phi);
        accumulate_counts(tokens, &phi, k, nw, &mut out.counts);
        out.phi.push(phi);
        out.gamma.push(gamma);
    }
    out
}

fn accumulate_counts(tokens: &[u32], phi: &[f64], k: usize, nw: usize, counts: &mut [f64]) {
    for (n, &w) in tokens.iter().enumerate() {
        for t in 0..k {
            counts[t * nw + w as usize] += phi[n * k + t];
        }
    }
}

/// Runs the E-step on every epoch in place and returns expected counts
/// indexed `(t, k, w)`.
fn e_step_all(problem: &Problem, log_weights: &[f64], state: &mut VariationalState) -> Vec<f64> {
    let (k, nw) = (problem.k, problem.n_words());
    let mut counts = vec![0.0; problem.len()];
    for (t, docs) in problem.epochs.docs.iter().enumerate() {
        let base = problem.at(t, 0, 0);
        let lw = &log_weights[base..base + k * nw];
        for &d in docs {
            let tokens = &problem.corpus.documents[d].tokens;
            e_step_doc(tokens, lw, k, nw, problem.alpha, &mut state.gamma[d], &mut state.phi[d]);
            accumulate_counts(tokens, &state.phi[d], k, nw, &mut counts[base..base + k * nw]);
        }
    }
    counts
}

/// Expected topic-word counts from the current responsibilities.
pub fn expected_counts(problem: &Problem, state: &VariationalState) -> Vec<f64> {
    let (k, nw) = (problem.k, problem.n_words());
    let mut counts = vec![0.0; problem.len()];
    for (t, docs) in problem.epochs.docs.iter().enumerate() {
        let base = problem.at(t, 0, 0);
        for &d in docs {
            let tokens = &problem.corpus.documents[d].tokens;
            accumulate_counts(tokens, &state.phi[d], k, nw, &mut counts[base..base + k * nw]);
        }
    }
    counts
}

fn document_terms(problem: &Problem, state: &VariationalState) -> f64 {
    let k = problem.k;
    let alpha = problem.alpha;
    let prior_norm = ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);
    let mut total = 0.0;
    for docs in &problem.epochs.docs {
        for &d in docs {
            let gamma = &state.gamma[d];
            let sum: f64 = gamma.iter().sum();
            let dig_sum = digamma(sum);
            let e_log_theta: Vec<f64> = gamma.iter().map(|&g| digamma(g) - dig_sum).collect();
            // E[log p(θ|α)] − E[log q(θ|γ)]
            total += prior_norm - ln_gamma(sum);
            for t in 0..k {
                total += (alpha - gamma[t]) * e_log_theta[t] + ln_gamma(gamma[t]);
            }
            // E[log p(z|θ)] − E[log q(z|φ)]
            let phi = &state.phi[d];
            for n in 0..phi.len() / k {
                for t in 0..k {
                    let p = phi[n * k + t];
                    if p > 0.0 {
                        total += p * (e_log_theta[t] - p.ln());
                    }
                }
            }
        }
    }
    total
}

/// The part of the ELBO that depends on `β̂`: expected word log-likelihood
/// under the bound plus the chains' `−KL(q‖p)`.
pub fn pseudo_objective(
    problem: &Problem,
    counts: &[f64],
    beta_hat: &[f64],
    obs_var: &[f64],
) -> Result<f64, DynTopicError> {
    let posterior = chain_posterior(problem, beta_hat, obs_var)?;
    let lw = log_word_weights(problem, &posterior);
    let data: f64 = counts.iter().zip(&lw).filter(|(c, _)| **c > 0.0).map(|(c, l)| c * l).sum();
    Ok(data + posterior.neg_kl)
}

/// Evidence lower bound of the whole variational state.
pub fn elbo(problem: &Problem, state: &VariationalState) -> Result<f64, DynTopicError> {
    problem.validate(state)?;
    let counts = expected_counts(problem, state);
    Ok(document_terms(problem, state) + pseudo_objective(problem, &counts, &state.beta_hat, &state.obs_var)?)
}

/// Smoothed means of every chain for arbitrary per-time inputs `values`
/// observed with the state's variances. The smoother is linear in its
/// observations, so this applies the posterior-mean operator.
fn smooth_values(problem: &Problem, values: &[f64], obs_var: &[f64]) -> Result<Vec<f64>, DynTopicError> {
    let mut out = vec![0.0; problem.len()];
    let times = &problem.epochs.times;
    for k in 0..problem.k {
        for w in 0..problem.n_words() {
            let obs = chain_observations(problem, values, obs_var, k, w);
            let filtered = kalman_forward(&obs, times, problem.sigma2_rate, problem.v0)?;
            let smoothed = kalman_smooth(&filtered, times, problem.sigma2_rate)?;
            for t in 0..problem.n_times() {
                out[problem.at(t, k, w)] = smoothed.means[t];
            }
        }
    }
    Ok(out)
}

/// Direction `ν̂² ⊙ ∇_β̂` (pseudo-observation variances as a diagonal metric).
///
/// With `S` the smoother's linear map and `g = ∂ELBO/∂m`, the gradient is
/// `∇ = diag(ν̂²)⁻¹ · S(ν̂² ⊙ g − (β̂ − m))`; the chain KL contributes the
/// `β̂ − m` residual.
fn scaled_gradient(
    problem: &Problem,
    counts: &[f64],
    beta_hat: &[f64],
    obs_var: &[f64],
    posterior: &ChainPosterior,
) -> Result<Vec<f64>, DynTopicError> {
    let nw = problem.n_words();
    let mut input = vec![0.0; problem.len()];
    for t in 0..problem.n_times() {
        for k in 0..problem.k {
            let base = problem.at(t, k, 0);
            let total: f64 = counts[base..base + nw].iter().sum();
            let pi = expected_word_probs(&posterior.m[base..base + nw], &posterior.v[base..base + nw]);
            for w in 0..nw {
                let i = base + w;
                if obs_var[i].is_finite() {
                    let g = counts[i] - total * pi[w];
                    input[i] = obs_var[i] * g - (beta_hat[i] - posterior.m[i]);
                }
            }
        }
    }
    let mut direction = smooth_values(problem, &input, obs_var)?;
    for (d, v) in direction.iter_mut().zip(obs_var) {
        if !v.is_finite() {
            *d = 0.0;
        }
    }
    Ok(direction)
}

/// Exact gradient of [`pseudo_objective`] with respect to `β̂`; zero at
/// times without observations.
pub fn pseudo_gradient(
    problem: &Problem,
    counts: &[f64],
    beta_hat: &[f64],
    obs_var: &[f64],
) -> Result<Vec<f64>, DynTopicError> {
    let posterior = chain_posterior(problem, beta_hat, obs_var)?;
    let mut g = scaled_gradient(problem, counts, beta_hat, obs_var, &posterior)?;
    for (x, v) in g.iter_mut().zip(obs_var) {
        if v.is_finite() {
            *x /= v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: f64,
    pub before: f64,
    pub after: f64,
}

/// One ascent step on `β̂` with `φ, γ` held fixed. The step starts at 1 along
/// the variance-scaled gradient and halves until the objective does not
/// decrease.
pub fn update_pseudo_observations(
    problem: &Problem,
    counts: &[f64],
    state: &mut VariationalState,
) -> Result<StepReport, DynTopicError> {
    let posterior = chain_posterior(problem, &state.beta_hat, &state.obs_var)?;
    let lw = log_word_weights(problem, &posterior);
    let before = counts.iter().zip(&lw).filter(|(c, _)| **c > 0.0).map(|(c, l)| c * l).sum::<f64>() + posterior.neg_kl;
    let direction = scaled_gradient(problem, counts, &state.beta_hat, &state.obs_var, &posterior)?;
    if direction.iter().all(|&d| d == 0.0) {
        return Ok(StepReport { step: 0.0, before, after: before });
    }
    let mut step = 1.0;
    let mut trial = state.beta_hat.clone();
    while step >= 1e-12 {
        for ((x, b), d) in trial.iter_mut().zip(&state.beta_hat).zip(&direction) {
            *x = b + step * d;
        }
        let after = pseudo_objective(problem, counts, &trial, &state.obs_var)?;
        if after >= before {
            state.beta_hat = trial;
            return Ok(StepReport { step, before, after });
        }
        step *= 0.5;
    }
    Err(DynTopicError::ConvergenceStall)
}

/// Fitted dynamic topics: smoothed natural parameters and the word
/// probabilities derived from them, indexed `(t, k, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdtmModel {
    pub k: usize,
    pub n_words: usize,
    pub times: Vec<f64>,
    pub sigma2_rate: f64,
    pub v0: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CdtmJson {
    k: usize,
    times: Vec<f64>,
    sigma2_rate: f64,
    v0: f64,
    m: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "V")]
    v: Vec<Vec<Vec<f64>>>,
}

impl CdtmModel {
    pub fn from_posterior(
        k: usize,
        n_words: usize,
        times: Vec<f64>,
        sigma2_rate: f64,
        v0: f64,
        m: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self, DynTopicError> {
        if m.len() != times.len() * k * n_words || v.len() != m.len() {
            return Err(DynTopicError::LengthMismatch("model arrays".into()));
        }
        check_times(&times)?;
        if v.iter().any(|&x| !(x >= 0.0)) {
            return Err(DynTopicError::Argument("variances must be nonnegative".into()));
        }
        let mut pi = Vec::with_capacity(m.len());
        for row in 0..times.len() * k {
            let r = row * n_words..(row + 1) * n_words;
            pi.extend(expected_word_probs(&m[r.clone()], &v[r]));
        }
        Ok(Self { k, n_words, times, sigma2_rate, v0, m, v, pi })
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn word_probs(&self, t: usize, k: usize) -> &[f64] {
        let start = (t * self.k + k) * self.n_words;
        &self.pi[start..start + self.n_words]
    }

    /// Word probabilities of a topic averaged over epochs.
    pub fn mean_word_probs(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_words];
        for t in 0..self.n_times() {
            for (o, p) in out.iter_mut().zip(self.word_probs(t, k)) {
                *o += p / self.n_times() as f64;
            }
        }
        out
    }

    pub fn top_words(&self, t: usize, k: usize, n: usize) -> Vec<u32> {
        lda::top_indices(self.word_probs(t, k), n)
    }

    fn nest(&self, flat: &[f64]) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_times())
            .map(|t| {
                (0..self.k)
                    .map(|k| {
                        let s = (t * self.k + k) * self.n_words;
                        flat[s..s + self.n_words].to_vec()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&CdtmJson {
            k: self.k,
            times: self.times.clone(),
            sigma2_rate: self.sigma2_rate,
            v0: self.v0,
            m: self.nest(&self.m),
            v: self.nest(&self.v),
        })
        .expect("model serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DynTopicError> {
        let j: CdtmJson = serde_json::from_slice(bytes)?;
        let n_words = j.m.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let flatten = |x: Vec<Vec<Vec<f64>>>| -> Result<Vec<f64>, DynTopicError> {
            if x.len() != j.times.len() || x.iter().any(|t| t.len() != j.k || t.iter().any(|r| r.len() != n_words)) {
                return Err(DynTopicError::LengthMismatch("model arrays are ragged".into()));
            }
            Ok(x.into_iter().flatten().flatten().collect())
        };
        let m = flatten(j.m)?;
        let v = flatten(j.v)?;
        Self::from_posterior(j.k, n_words, j.times, j.sigma2_rate, j.v0, m, v)
    }
}

/// Outcome of [`fit_cdtm`].
#[derive(Debug, Clone)]
pub struct CdtmFit {
    pub model: CdtmModel,
    pub state: VariationalState,
    /// ELBO after initialization and after every iteration.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

/// Initial state: `β̂ = log β` of a short static fit on the pooled corpus,
/// `ν̂² = 1 / (expected count + 1)` from one E-step under that fit.
pub fn initial_state(problem: &Problem, params: &CdtmParams) -> Result<VariationalState, DynTopicError> {
    let (k, nw) = (problem.k, problem.n_words());
    let sweeps = params.init_sweeps.max(2);
    let static_params = LdaParams {
        k,
        alpha: params.alpha,
        eta: 0.01,
        iterations: sweeps,
        burn_in: sweeps / 2,
        thin: 1,
        seed: params.seed,
    };
    let (static_model, _) = lda::fit_gibbs(problem.corpus, &static_params)?;
    let log_beta: Vec<f64> = static_model.beta.iter().flatten().map(|p| p.ln()).collect();

    let n_docs = problem.corpus.num_docs();
    let mut state = VariationalState {
        beta_hat: vec![0.0; problem.len()],
        obs_var: vec![f64::INFINITY; problem.len()],
        phi: vec![Vec::new(); n_docs],
        gamma: problem
            .corpus
            .documents
            .iter()
            .map(|d| vec![params.alpha + d.len() as f64 / k as f64; k])
            .collect(),
        tokens_per_epoch: problem
            .epochs
            .docs
            .iter()
            .map(|ds| ds.iter().map(|&d| problem.corpus.documents[d].len()).sum())
            .collect(),
    };
    let mut init_weights = vec![0.0; problem.len()];
    for t in 0..problem.n_times() {
        let base = problem.at(t, 0, 0);
        init_weights[base..base + k * nw].copy_from_slice(&log_beta);
    }
    let counts = e_step_all(problem, &init_weights, &mut state);
    for t in 0..problem.n_times() {
        if problem.epochs.docs[t].is_empty() {
            continue;
        }
        for i in problem.at(t, 0, 0)..problem.at(t, 0, 0) + k * nw {
            state.beta_hat[i] = init_weights[i];
            state.obs_var[i] = 1.0 / (counts[i] + 1.0);
        }
    }
    Ok(state)
}

/// Coordinate ascent on the ELBO. Stops when the improvement falls below
/// `tol`, after `max_iters`, or when the line search can no longer
/// make progress.
pub fn fit_cdtm(corpus: &Corpus, epochs: &Epochs, params: &CdtmParams) -> Result<CdtmFit, DynTopicError> {
    params.validate()?;
    if epochs.is_empty() {
        return Err(DynTopicError::Argument("need at least one epoch".into()));
    }
    if corpus.num_docs() == 0 || corpus.vocab_size() == 0 {
        return Err(DynTopicError::Argument("corpus is empty".into()));
    }
    let problem = Problem {
        corpus,
        epochs,
        k: params.k,
        alpha: params.alpha,
        sigma2_rate: params.sigma2_rate,
        v0: params.v0,
    };
    let mut state = initial_state(&problem, params)?;
    problem.validate(&state)?;

    let posterior = chain_posterior(&problem, &state.beta_hat, &state.obs_var)?;
    let mut counts = e_step_all(&problem, &log_word_weights(&problem, &posterior), &mut state);
    let mut current = elbo(&problem, &state)?;
    let mut trace = vec![current];
    let mut converged = false;

    for _ in 0..params.max_iters {
        match update_pseudo_observations(&problem, &counts, &mut state) {
            Ok(_) => {}
            Err(DynTopicError::ConvergenceStall) => {
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let posterior = chain_posterior(&problem, &state.beta_hat, &state.obs_var)?;
        counts = e_step_all(&problem, &log_word_weights(&problem, &posterior), &mut state);
        let next = elbo(&problem, &state)?;
        trace.push(next);
        let improvement = next - current;
        current = next;
        if improvement < params.tol {
            converged = true;
            break;
        }
    }

    let posterior = chain_posterior(&problem, &state.beta_hat, &state.obs_var)?;
    let model = CdtmModel::from_posterior(
        params.k,
        corpus.vocab_size(),
        epochs.times.clone(),
        params.sigma2_rate,
        params.v0,
        posterior.m,
        posterior.v,
    )?;
    Ok(CdtmFit { model, state, elbo_trace: trace, converged })
}

/// Per-document topic mixtures `γ / Σγ` of a fitted state.
pub fn theta_from_state(state: &VariationalState) -> lda::ThetaMatrix {
    lda::ThetaMatrix(
        state
            .gamma
            .iter()
            .map(|g| {
                let s: f64 = g.iter().sum();
                g.iter().map(|x| x / s).collect()
            })
            .collect(),
    )
}
