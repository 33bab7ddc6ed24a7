//! Static finite-topic model trained by collapsed Gibbs sampling.
//!
//! Document-topic mixtures and topic-word distributions are integrated out
//! during sampling; the sampler only tracks per-token topic assignments and
//! the count tables they induce. Point estimates of both are smoothed count
//! means averaged over thinned post-burn-in sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, Vocabulary};

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("vocabulary mismatch: token index {token} out of range for {n_words} words")]
    VocabularyMismatch { token: u32, n_words: usize },
    #[error("theta has {theta_rows} rows but corpus has {docs} documents")]
    Alignment { theta_rows: usize, docs: usize },
    #[error("token {word} in document {doc} has zero probability")]
    ZeroProbability { doc: usize, word: u32 },
    #[error("count tables inconsistent after sweep {iteration}: {detail}")]
    Inconsistent { iteration: usize, detail: String },
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Topic-word distributions and the symmetric priors they were fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    /// Document-topic Dirichlet concentration.
    pub alpha: f64,
    /// Topic-word Dirichlet concentration.
    pub eta: f64,
    /// `k` rows, one distribution over the vocabulary each.
    pub beta: Vec<Vec<f64>>,
    pub vocabulary: Vocabulary,
}

#[derive(Serialize, Deserialize)]
struct LdaModelJson {
    k: usize,
    alpha: f64,
    eta: f64,
    vocab: Vocabulary,
    beta: Vec<Vec<f64>>,
}

impl LdaModel {
    pub fn new(
        k: usize,
        alpha: f64,
        eta: f64,
        beta: Vec<Vec<f64>>,
        vocabulary: Vocabulary,
    ) -> Result<Self, LdaError> {
        if k < 1 {
            return Err(LdaError::Argument("K must be at least 1".into()));
        }
        if !(alpha > 0.0 && eta > 0.0) {
            return Err(LdaError::Argument("priors must be positive".into()));
        }
        if beta.len() != k {
            return Err(LdaError::Argument(format!("beta has {} rows, K = {k}", beta.len())));
        }
        for (i, row) in beta.iter().enumerate() {
            if row.len() != vocabulary.len() {
                return Err(LdaError::Argument(format!(
                    "beta row {i} has {} entries for {} words",
                    row.len(),
                    vocabulary.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(LdaError::Argument(format!("beta row {i} is not a distribution")));
            }
        }
        Ok(Self { k, alpha, eta, beta, vocabulary })
    }

    pub fn n_words(&self) -> usize {
        self.vocabulary.len()
    }

    /// Indexes of the `n` most probable words of `topic`, ties by lower index.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<u32> {
        top_indices(&self.beta[topic], n)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&LdaModelJson {
            k: self.k,
            alpha: self.alpha,
            eta: self.eta,
            vocab: self.vocabulary.clone(),
            beta: self.beta.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, LdaError> {
        let j: LdaModelJson = serde_json::from_slice(bytes)?;
        Self::new(j.k, j.alpha, j.eta, j.beta, j.vocab)
    }
}

pub(crate) fn top_indices(row: &[f64], n: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..row.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        row[b as usize]
            .partial_cmp(&row[a as usize])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(n);
    idx
}

/// Per-document topic mixtures, one row per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaMatrix(pub Vec<Vec<f64>>);

impl ThetaMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn num_docs(&self) -> usize {
        self.0.len()
    }

    pub fn num_topics(&self) -> usize {
        self.0.first().map_or(0, Vec::len)
    }

    /// Dominant topic of a document; ties go to the lowest index.
    pub fn argmax(&self, doc: usize) -> usize {
        argmax(&self.0[doc])
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Training configuration. `LdaParams::new(k)` fills the conventional defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Post-burn-in sweeps between averaged samples.
    pub thin: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            eta: 0.01,
            iterations: 2000,
            burn_in: 1000,
            thin: 10,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), LdaError> {
        if self.k < 1 {
            return Err(LdaError::Argument("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.eta > 0.0 && self.alpha.is_finite() && self.eta.is_finite()) {
            return Err(LdaError::Argument("alpha and eta must be positive".into()));
        }
        if self.iterations <= self.burn_in {
            return Err(LdaError::Argument("iterations must exceed burn_in".into()));
        }
        if self.thin < 1 {
            return Err(LdaError::Argument("thin must be at least 1".into()));
        }
        if self.k > u16::MAX as usize {
            return Err(LdaError::Argument("K too large".into()));
        }
        Ok(())
    }
}

/// Mutable collapsed-Gibbs chain over one corpus.
pub struct GibbsSampler<'a> {
    docs: &'a [Document],
    k: usize,
    n_words: usize,
    alpha: f64,
    eta: f64,
    z: Vec<Vec<u16>>,
    n_dk: Vec<u32>,
    /// Word-major: `n_wk[w * k + t]`.
    n_wk: Vec<u32>,
    n_k: Vec<u32>,
    rng: ChaCha8Rng,
    iteration: usize,
    weights: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Initializes assignments uniformly at random.
    pub fn new(
        corpus: &'a Corpus,
        k: usize,
        alpha: f64,
        eta: f64,
        seed: u64,
    ) -> Result<Self, LdaError> {
        let n_words = corpus.vocab_size();
        for doc in &corpus.documents {
            if let Some(&token) = doc.tokens.iter().find(|&&t| t as usize >= n_words) {
                return Err(LdaError::VocabularyMismatch { token, n_words });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n_dk = vec![0; corpus.num_docs() * k];
        let mut n_wk = vec![0; n_words * k];
        let mut n_k = vec![0; k];
        let z = corpus
            .documents
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.tokens
                    .iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d * k + t] += 1;
                        n_wk[w as usize * k + t] += 1;
                        n_k[t] += 1;
                        t as u16
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            docs: &corpus.documents,
            k,
            n_words,
            alpha,
            eta,
            z,
            n_dk,
            n_wk,
            n_k,
            rng,
            iteration: 0,
            weights: vec![0.0; k],
        })
    }

    /// One systematic-scan sweep over every token.
    pub fn sweep(&mut self) {
        let k = self.k;
        let n_eta = self.n_words as f64 * self.eta;
        for (d, doc) in self.docs.iter().enumerate() {
            let dk = &mut self.n_dk[d * k..(d + 1) * k];
            for (n, &w) in doc.tokens.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][n] as usize;
                dk[old] -= 1;
                self.n_wk[w * k + old] -= 1;
                self.n_k[old] -= 1;

                let wk = &self.n_wk[w * k..(w + 1) * k];
                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + self.alpha) * (wk[t] as f64 + self.eta)
                        / (self.n_k[t] as f64 + n_eta);
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                dk[new] += 1;
                self.n_wk[w * k + new] += 1;
                self.n_k[new] += 1;
                self.z[d][n] = new as u16;
            }
        }
        self.iteration += 1;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Current topic assignment of every token, document by document.
    pub fn assignments(&self) -> &[Vec<u16>] {
        &self.z
    }

    /// Recounts the tables from the assignments and compares.
    pub fn check_consistency(&self) -> Result<(), LdaError> {
        let k = self.k;
        let fail = |detail: String| LdaError::Inconsistent { iteration: self.iteration, detail };
        let mut n_dk = vec![0u32; self.n_dk.len()];
        let mut n_wk = vec![0u32; self.n_wk.len()];
        let mut n_k = vec![0u32; k];
        for (d, doc) in self.docs.iter().enumerate() {
            for (&w, &t) in doc.tokens.iter().zip(&self.z[d]) {
                n_dk[d * k + t as usize] += 1;
                n_wk[w as usize * k + t as usize] += 1;
                n_k[t as usize] += 1;
            }
            let row: u32 = self.n_dk[d * k..(d + 1) * k].iter().sum();
            if row as usize != doc.len() {
                return Err(fail(format!("document {d} counts {row} != length {}", doc.len())));
            }
        }
        if n_dk != self.n_dk {
            return Err(fail("document-topic counts".into()));
        }
        if n_wk != self.n_wk {
            return Err(fail("topic-word counts".into()));
        }
        if n_k != self.n_k {
            return Err(fail("topic totals".into()));
        }
        let total: u32 = self.n_k.iter().sum();
        let tokens: usize = self.docs.iter().map(Document::len).sum();
        if total as usize != tokens {
            return Err(fail(format!("{total} assigned of {tokens} tokens")));
        }
        Ok(())
    }

    fn accumulate(&self, theta: &mut [Vec<f64>], beta: &mut [Vec<f64>]) {
        let k = self.k;
        let k_alpha = k as f64 * self.alpha;
        for (d, doc) in self.docs.iter().enumerate() {
            let denom = doc.len() as f64 + k_alpha;
            for t in 0..k {
                theta[d][t] += (self.n_dk[d * k + t] as f64 + self.alpha) / denom;
            }
        }
        let n_eta = self.n_words as f64 * self.eta;
        for t in 0..k {
            let denom = self.n_k[t] as f64 + n_eta;
            for w in 0..self.n_words {
                beta[t][w] += (self.n_wk[w * k + t] as f64 + self.eta) / denom;
            }
        }
    }
}

/// Fits the static topic model, returning topic-word distributions and the
/// per-document mixtures of the training corpus.
pub fn fit_gibbs(corpus: &Corpus, params: &LdaParams) -> Result<(LdaModel, ThetaMatrix), LdaError> {
    params.validate()?;
    if corpus.num_docs() == 0 || corpus.vocab_size() == 0 {
        return Err(LdaError::Argument("corpus is empty".into()));
    }
    let k = params.k;
    let mut sampler = GibbsSampler::new(corpus, k, params.alpha, params.eta, params.seed)?;
    let mut theta = vec![vec![0.0; k]; corpus.num_docs()];
    let mut beta = vec![vec![0.0; corpus.vocab_size()]; k];
    let mut samples = 0usize;

    for it in 0..params.iterations {
        sampler.sweep();
        let at_burn_in = it + 1 == params.burn_in;
        let last = it + 1 == params.iterations;
        if cfg!(debug_assertions) || at_burn_in || last {
            sampler.check_consistency()?;
        }
        if it >= params.burn_in && (it - params.burn_in) % params.thin == 0 {
            sampler.accumulate(&mut theta, &mut beta);
            samples += 1;
        }
    }

    let scale = 1.0 / samples as f64;
    for row in theta.iter_mut().chain(beta.iter_mut()) {
        let s: f64 = row.iter().sum();
        // averaging keeps rows normalized up to rounding; renormalize the residue away
        row.iter_mut().for_each(|x| *x *= scale);
        let s = s * scale;
        row.iter_mut().for_each(|x| *x /= s);
    }
    let model = LdaModel::new(k, params.alpha, params.eta, beta, corpus.vocabulary.clone())?;
    Ok((model, ThetaMatrix(theta)))
}

/// Fold-in inference of one document's mixture with the topics held fixed.
pub fn infer_theta(
    model: &LdaModel,
    tokens: &[u32],
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<f64>, LdaError> {
    let n_words = model.n_words();
    if let Some(&token) = tokens.iter().find(|&&t| t as usize >= n_words) {
        return Err(LdaError::VocabularyMismatch { token, n_words });
    }
    if iterations <= burn_in {
        return Err(LdaError::Argument("iterations must exceed burn_in".into()));
    }
    let k = model.k;
    if tokens.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<usize> = tokens.iter().map(|_| rng.random_range(0..k)).collect();
    let mut n_k = vec![0u32; k];
    for &t in &z {
        n_k[t] += 1;
    }
    let mut weights = vec![0.0; k];
    let mut theta = vec![0.0; k];
    let denom = tokens.len() as f64 + k as f64 * model.alpha;
    for it in 0..iterations {
        for (n, &w) in tokens.iter().enumerate() {
            n_k[z[n]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (n_k[t] as f64 + model.alpha) * model.beta[t][w as usize];
                weights[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = weights.partition_point(|&c| c <= u).min(k - 1);
            n_k[new] += 1;
            z[n] = new;
        }
        if it >= burn_in {
            for t in 0..k {
                theta[t] += (n_k[t] as f64 + model.alpha) / denom;
            }
        }
    }
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|x| *x /= s);
    Ok(theta)
}

/// `exp(-(1/N) Σ log Σ_k θ_dk β_kw)` over every token of the corpus.
pub fn perplexity(model: &LdaModel, theta: &ThetaMatrix, corpus: &Corpus) -> Result<f64, LdaError> {
    if theta.num_docs() != corpus.num_docs() {
        return Err(LdaError::Alignment { theta_rows: theta.num_docs(), docs: corpus.num_docs() });
    }
    let mut log_lik = 0.0;
    let mut n = 0usize;
    for (d, (doc, row)) in corpus.documents.iter().zip(theta.rows()).enumerate() {
        if row.len() != model.k {
            return Err(LdaError::Argument(format!("theta row {d} has {} topics", row.len())));
        }
        for &w in &doc.tokens {
            if w as usize >= model.n_words() {
                return Err(LdaError::VocabularyMismatch { token: w, n_words: model.n_words() });
            }
            let p: f64 = row.iter().zip(&model.beta).map(|(th, b)| th * b[w as usize]).sum();
            if p <= 0.0 {
                return Err(LdaError::ZeroProbability { doc: d, word: w });
            }
            log_lik += p.ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(LdaError::Argument("corpus has no tokens".into()));
    }
    Ok((-log_lik / n as f64).exp())
}

/// Document length distribution for [`sample_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DocLength {
    Fixed(usize),
    Poisson(f64),
}

/// Cached per-topic word samplers.
pub struct TopicWordSampler {
    tables: Vec<WeightedIndex<f64>>,
}

impl TopicWordSampler {
    pub fn new(beta: &[Vec<f64>]) -> Self {
        Self {
            tables: beta
                .iter()
                .map(|row| WeightedIndex::new(row).expect("topic row has positive mass"))
                .collect(),
        }
    }

    /// Draws a mixture from `Dir(alpha)`, then a topic and a word per token.
    /// Returns the word indexes and their topics.
    pub fn sample_document<R: Rng>(
        &self,
        alpha: &[f64],
        len: usize,
        rng: &mut R,
    ) -> (Vec<u32>, Vec<usize>) {
        let theta = sample_dirichlet(alpha, rng);
        let topic_law = WeightedIndex::new(&theta).expect("mixture has positive mass");
        (0..len)
            .map(|_| {
                let t = topic_law.sample(rng);
                (self.tables[t].sample(rng) as u32, t)
            })
            .unzip()
    }
}

/// Convenience wrapper building the word tables for a single draw.
pub fn sample_document<R: Rng>(
    beta: &[Vec<f64>],
    alpha: &[f64],
    len: usize,
    rng: &mut R,
) -> (Vec<u32>, Vec<usize>) {
    TopicWordSampler::new(beta).sample_document(alpha, len, rng)
}

pub(crate) fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed; fall back to a vertex chosen by the same weights
        let vertex = WeightedIndex::new(alpha).unwrap().sample(rng);
        draws.iter_mut().enumerate().for_each(|(i, x)| *x = (i == vertex) as u8 as f64);
    }
    draws
}

/// A sampled corpus together with the latent variables that produced it.
#[derive(Debug, Clone)]
pub struct SampledCorpus {
    pub corpus: Corpus,
    pub topics: Vec<Vec<usize>>,
    pub theta: ThetaMatrix,
}

/// Draws `d` documents from the model's generative process.
pub fn sample_corpus(
    model: &LdaModel,
    d: usize,
    length: DocLength,
    seed: u64,
) -> Result<SampledCorpus, LdaError> {
    if d < 1 {
        return Err(LdaError::Argument("D must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = TopicWordSampler::new(&model.beta);
    let alpha = vec![model.alpha; model.k];
    let poisson = match length {
        DocLength::Poisson(mean) => Some(
            Poisson::new(mean).map_err(|e| LdaError::Argument(format!("length law: {e}")))?,
        ),
        DocLength::Fixed(_) => None,
    };
    let mut docs = Vec::with_capacity(d);
    let mut topics = Vec::with_capacity(d);
    let mut thetas = Vec::with_capacity(d);
    for _ in 0..d {
        let len = match (length, &poisson) {
            (DocLength::Fixed(n), _) => n,
            (_, Some(p)) => p.sample(&mut rng) as usize,
            _ => unreachable!(),
        };
        let theta = sample_dirichlet(&alpha, &mut rng);
        let topic_law = WeightedIndex::new(&theta).expect("mixture has positive mass");
        let (w, z): (Vec<u32>, Vec<usize>) = (0..len)
            .map(|_| {
                let t = topic_law.sample(&mut rng);
                (words.tables[t].sample(&mut rng) as u32, t)
            })
            .unzip();
        docs.push(w);
        topics.push(z);
        thetas.push(theta);
    }
    Ok(SampledCorpus {
        corpus: Corpus::from_token_ids(model.vocabulary.clone(), docs),
        topics,
        theta: ThetaMatrix(thetas),
    })
}

/// Greedily pairs estimated topics with reference topics by smallest L1
/// distance. Entry `i` of the result is the reference topic matched to
/// estimated topic `i`.
pub fn greedy_topic_matching(estimated: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in estimated.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            pairs.push((l1_distance(e, r), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matched = vec![usize::MAX; estimated.len()];
    let mut used = vec![false; reference.len()];
    for (_, i, j) in pairs {
        if matched[i] == usize::MAX && !used[j] {
            matched[i] = j;
            used[j] = true;
        }
    }
    matched
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
