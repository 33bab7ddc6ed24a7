//! Independent reference computations shared by the integration tests and
//! the acceptance harness.
#![allow(dead_code)]

use eventmap::corpus::{Corpus, Vocabulary};
use eventmap::dyntopic::Epochs;
use eventmap::lda::GibbsSampler;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

pub fn vocab(n: usize) -> Vocabulary {
    Vocabulary::from_words((0..n).map(|i| format!("w{i}")).collect())
}

/// Exact collapsed posterior over all `K^T` assignments, tokens ordered
/// document by document; configuration index uses base-K digits with the
/// first token most significant.
pub fn enumerate_collapsed_posterior(docs: &[Vec<u32>], k: usize, n_words: usize, alpha: f64, eta: f64) -> Vec<f64> {
    let tokens: Vec<(usize, usize)> = docs
        .iter()
        .enumerate()
        .flat_map(|(d, ws)| ws.iter().map(move |&w| (d, w as usize)))
        .collect();
    let n = tokens.len();
    let total = k.pow(n as u32);
    let mut log_p = Vec::with_capacity(total);
    for config in 0..total {
        let mut z = vec![0usize; n];
        let mut c = config;
        for i in (0..n).rev() {
            z[i] = c % k;
            c /= k;
        }
        let mut n_dk = vec![vec![0usize; k]; docs.len()];
        let mut n_kw = vec![vec![0usize; n_words]; k];
        for (&(d, w), &t) in tokens.iter().zip(&z) {
            n_dk[d][t] += 1;
            n_kw[t][w] += 1;
        }
        let mut lp = 0.0;
        for (d, counts) in n_dk.iter().enumerate() {
            lp += ln_gamma(k as f64 * alpha) - ln_gamma(k as f64 * alpha + docs[d].len() as f64);
            for &c in counts {
                lp += ln_gamma(c as f64 + alpha) - ln_gamma(alpha);
            }
        }
        for row in &n_kw {
            let nk: usize = row.iter().sum();
            lp += ln_gamma(n_words as f64 * eta) - ln_gamma(nk as f64 + n_words as f64 * eta);
            for &c in row {
                lp += ln_gamma(c as f64 + eta) - ln_gamma(eta);
            }
        }
        log_p.push(lp);
    }
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Total-variation distance between the Gibbs sampler's empirical
/// assignment distribution and the enumerated posterior.
pub fn gibbs_tv(docs: &[Vec<u32>], n_words: usize, alpha: f64, eta: f64, burn_in: usize, samples: usize, seed: u64) -> f64 {
    let k = 2;
    let corpus = Corpus::from_token_ids(vocab(n_words), docs.to_vec());
    let exact = enumerate_collapsed_posterior(docs, k, n_words, alpha, eta);
    let mut sampler = GibbsSampler::new(&corpus, k, alpha, eta, seed).expect("sampler");
    for _ in 0..burn_in {
        sampler.sweep();
    }
    let mut hist = vec![0usize; exact.len()];
    for _ in 0..samples {
        sampler.sweep();
        let mut idx = 0;
        for doc in sampler.assignments() {
            for &z in doc {
                idx = idx * k + z as usize;
            }
        }
        hist[idx] += 1;
    }
    0.5 * hist
        .iter()
        .zip(&exact)
        .map(|(&h, p)| (h as f64 / samples as f64 - p).abs())
        .sum::<f64>()
}

/// Posterior marginals of a Brownian chain with prior `N(0, v0)` at the first
/// time, conditioned on the given observations by dense Gaussian algebra.
pub fn dense_conditioning(times: &[f64], obs: &[Option<(f64, f64)>], sigma2: f64, v0: f64) -> (Vec<f64>, Vec<f64>) {
    let t = times.len();
    let prior = DMatrix::from_fn(t, t, |i, j| v0 + sigma2 * (times[i.min(j)] - times[0]));
    let seen: Vec<usize> = (0..t).filter(|&i| obs[i].is_some()).collect();
    if seen.is_empty() {
        return (vec![0.0; t], (0..t).map(|i| prior[(i, i)]).collect());
    }
    let m = seen.len();
    let h = DMatrix::from_fn(m, t, |r, c| if seen[r] == c { 1.0 } else { 0.0 });
    let noise = DMatrix::from_fn(m, m, |r, c| if r == c { obs[seen[r]].unwrap().1 } else { 0.0 });
    let y = DVector::from_fn(m, |r, _| obs[seen[r]].unwrap().0);
    let s = &h * &prior * h.transpose() + noise;
    let gain = &prior * h.transpose() * s.try_inverse().expect("invertible");
    let mean = &gain * y;
    let cov = &prior - &gain * &h * &prior;
    (mean.iter().copied().collect(), (0..t).map(|i| cov[(i, i)]).collect())
}

/// Mean-field fixed point for one document by plain iteration of
/// `φ ∝ exp(ψ(γ)) π` and `γ = α + Σφ` until nothing moves.
pub fn mean_field_fixed_point(tokens: &[usize], pi: &[Vec<f64>], alpha: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = pi.len();
    let mut gamma = vec![alpha + tokens.len() as f64 / k as f64; k];
    let mut phi = vec![vec![0.0; k]; tokens.len()];
    for _ in 0..100_000 {
        for (n, &w) in tokens.iter().enumerate() {
            let raw: Vec<f64> = (0..k).map(|j| digamma(gamma[j]).exp() * pi[j][w]).collect();
            let s: f64 = raw.iter().sum();
            phi[n] = raw.iter().map(|x| x / s).collect();
        }
        let next: Vec<f64> = (0..k).map(|j| alpha + phi.iter().map(|p| p[j]).sum::<f64>()).collect();
        let delta = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma = next;
        if delta < 1e-14 {
            break;
        }
    }
    (phi, gamma)
}

/// Variational EM for static LDA with maximum-likelihood topics.
pub fn variational_lda(docs: &[Vec<u32>], n_words: usize, alpha: f64, init_beta: &[Vec<f64>], iterations: usize) -> Vec<Vec<f64>> {
    let k = init_beta.len();
    let mut beta = init_beta.to_vec();
    for _ in 0..iterations {
        let mut counts = vec![vec![1e-12; n_words]; k];
        for doc in docs {
            let tokens: Vec<usize> = doc.iter().map(|&w| w as usize).collect();
            let (phi, _) = mean_field_fixed_point(&tokens, &beta, alpha);
            for (n, &w) in tokens.iter().enumerate() {
                for j in 0..k {
                    counts[j][w] += phi[n][j];
                }
            }
        }
        beta = counts
            .into_iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect();
    }
    beta
}

fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[f(d)]` for `d ~ N(0, var)` by composite Simpson on ±12 sd.
fn gaussian_expectation(var: f64, f: impl Fn(f64) -> f64) -> f64 {
    let sd = var.sqrt();
    let n = 20_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let x = a + i as f64 * h;
        let weight = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        total += weight * f(x * sd) * standard_normal_pdf(x);
    }
    total * h / 3.0
}

/// Exact log evidence of a two-token document under one epoch, two topics
/// and two words: natural parameters iid `N(0, v0)`, softmax link, Dirichlet
/// `α` mixture. Only the difference of a topic's two parameters matters,
/// and it is `N(0, 2 v0)`.
pub fn exact_log_evidence_two_tokens(w1: usize, w2: usize, alpha: f64, v0: f64) -> f64 {
    let sigmoid = |d: f64| 1.0 / (1.0 + (-d).exp());
    let prob = |w: usize, d: f64| if w == 1 { sigmoid(d) } else { 1.0 - sigmoid(d) };
    let single = |w: usize| gaussian_expectation(2.0 * v0, |d| prob(w, d));
    let same = gaussian_expectation(2.0 * v0, |d| prob(w1, d) * prob(w2, d));
    let norm = 2.0 * alpha * (2.0 * alpha + 1.0);
    let p_same = alpha * (alpha + 1.0) / norm;
    let p_diff = alpha * alpha / norm;
    (2.0 * p_same * same + 2.0 * p_diff * single(w1) * single(w2)).ln()
}

/// Two topics over six words across six monthly epochs. Topic 0 is stable;
/// topic 1's most likely word switches from word 3 to word 4 after the third
/// epoch.
pub fn drift_corpus(docs_per_epoch: usize, doc_len: usize, seed: u64) -> (Corpus, Epochs, Vec<Vec<Vec<f64>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stable = vec![0.45, 0.3, 0.2, 0.02, 0.02, 0.01];
    let early = vec![0.02, 0.02, 0.01, 0.6, 0.1, 0.25];
    let late = vec![0.02, 0.02, 0.01, 0.1, 0.6, 0.25];
    let gamma = Gamma::new(0.5, 1.0).unwrap();
    let mut docs = Vec::new();
    let mut epoch_docs = Vec::new();
    let mut truth = Vec::new();
    for t in 0..6 {
        let topics = vec![stable.clone(), if t < 3 { early.clone() } else { late.clone() }];
        let samplers: Vec<WeightedIndex<f64>> = topics.iter().map(|b| WeightedIndex::new(b).unwrap()).collect();
        let mut ids = Vec::new();
        for _ in 0..docs_per_epoch {
            let g: Vec<f64> = (0..2).map(|_| gamma.sample(&mut rng)).collect();
            let theta0 = g[0] / (g[0] + g[1]);
            let tokens: Vec<u32> = (0..doc_len)
                .map(|_| {
                    let z = usize::from(rng.random::<f64>() >= theta0);
                    samplers[z].sample(&mut rng) as u32
                })
                .collect();
            ids.push(docs.len());
            docs.push(tokens);
        }
        epoch_docs.push(ids);
        truth.push(topics);
    }
    let corpus = Corpus::from_token_ids(vocab(6), docs);
    let times: Vec<f64> = (0..6).map(|t| 15.0 + 30.0 * t as f64).collect();
    let labels = (0..6).map(|t| format!("m{t}")).collect();
    let epochs = Epochs::new(times, labels, epoch_docs).unwrap();
    (corpus, epochs, truth)
}

/// Fits K=3 topics to a corpus of 500 documents of 100 tokens drawn from a
/// known 50-word model and returns the per-topic L1 error after matching.
pub fn generative_recovery(seed: u64) -> Vec<f64> {
    use eventmap::lda::{fit_gibbs, greedy_topic_matching, l1_distance, sample_corpus, DocLength, LdaModel, LdaParams};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(0.1, 1.0).unwrap();
    let beta: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let g: Vec<f64> = (0..50).map(|_| gamma.sample(&mut rng) + 1e-12).collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let truth = LdaModel::new(3, 0.5, 0.01, beta.clone(), vocab(50)).unwrap();
    let sampled = sample_corpus(&truth, 500, DocLength::Fixed(100), seed + 1).unwrap();
    let params = LdaParams { alpha: 0.5, eta: 0.01, iterations: 400, burn_in: 200, seed: seed + 2, ..LdaParams::new(3) };
    let (fit, _) = fit_gibbs(&sampled.corpus, &params).unwrap();
    let matching = greedy_topic_matching(&fit.beta, &beta);
    (0..3).map(|k| l1_distance(&fit.beta[k], &beta[matching[k]])).collect()
}

/// Gibbs-vs-enumeration on a fixed six-token, two-word corpus.
pub fn enumeration_check(seed: u64) -> f64 {
    let docs = vec![vec![0, 0, 1], vec![1, 1], vec![0]];
    gibbs_tv(&docs, 2, 1.0, 0.5, 1000, 50_000, seed)
}

pub const TABLE1_TOPIC: &str = "Abandoned dump site";
pub const COWLEY: &str = "20035";
pub const CRAWFORD: &str = "20037";
pub const CHEROKEE: &str = "20021";
pub const RENO: &str = "20155";

/// Counties marked at threshold 0.02 for each tabulated year.
pub fn table1_expected_marks() -> Vec<(i32, Vec<&'static str>)> {
    vec![
        (2000, vec![COWLEY, RENO]),
        (2002, vec![]),
        (2004, vec![RENO]),
        (2006, vec![]),
        (2008, vec![RENO]),
        (2010, vec![CHEROKEE]),
    ]
}

pub fn table1_bytes() -> &'static [u8] {
    include_bytes!("../../fixtures/table1.csv")
}

/// Random table with `n_counties × n_years` cells over `k` labelled topics.
pub fn random_table(rng: &mut ChaCha8Rng, n_counties: usize, n_years: usize, k: usize) -> eventmap::ProportionTable {
    let mut csv = String::from("fips,year,topic,proportion,n_reports\n");
    for c in 0..n_counties {
        for y in 0..n_years {
            let g: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-9).collect();
            let s: f64 = g.iter().sum();
            let n = rng.random_range(1..20);
            for (t, x) in g.iter().enumerate() {
                csv.push_str(&format!("{:05},{},topic {t},{},{n}\n", 20001 + 2 * c, 2000 + y, x / s));
            }
        }
    }
    eventmap::ProportionTable::from_csv(csv.as_bytes()).unwrap()
}

/// Events with random centroids, dates and report text that exercises XML
/// and JSON escaping.
pub fn random_geo_events(rng: &mut ChaCha8Rng, n: usize) -> Vec<eventmap::GeoEvent> {
    use eventmap::ingest::{GeoEvent, RawEvent};
    let pieces = ["jars", "<tubing>", "&", "\"lye\"", "it's", "café", "tanks\n", "]]>", "\u{1F9EA}"];
    (0..n)
        .map(|i| {
            let words: Vec<&str> = (0..rng.random_range(0..12)).map(|_| pieces[rng.random_range(0..pieces.len())]).collect();
            GeoEvent {
                raw: RawEvent {
                    id: format!("r{i:04}"),
                    date: chrono::NaiveDate::from_ymd_opt(rng.random_range(2000..2012), rng.random_range(1..13), rng.random_range(1..29)).unwrap(),
                    state: "KS".into(),
                    county_name: rng.random_bool(0.5).then(|| "Some <County>".to_string()),
                    address: rng.random_bool(0.5).then(|| format!("{} Rd, KS 6{:04}", i, rng.random_range(0..10000))),
                    event_type: "Abandoned dump site".into(),
                    report_text: words.join(" "),
                },
                fips: format!("20{:03}", rng.random_range(1..210)),
                lat: rng.random_range(-90.0..=90.0),
                lon: rng.random_range(-180.0..=180.0),
                canonical_county: "X & Y".into(),
            }
        })
        .collect()
}

/// Checks KML structure and `lon,lat` order; returns a description of the
/// first problem found.
pub fn check_kml(bytes: &[u8], events: &[eventmap::GeoEvent]) -> Result<(), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "kml" || root.tag_name().namespace() != Some(eventmap::geoexport::KML_NAMESPACE) {
        return Err("root is not a KML 2.2 element".into());
    }
    let placemarks: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("Placemark")).collect();
    if placemarks.len() != events.len() {
        return Err(format!("{} placemarks for {} events", placemarks.len(), events.len()));
    }
    for (p, e) in placemarks.iter().zip(events) {
        let coords = p
            .descendants()
            .find(|n| n.has_tag_name("coordinates"))
            .and_then(|n| n.text())
            .ok_or("placemark without coordinates")?;
        let parts: Vec<f64> = coords.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        if parts != [e.lon, e.lat, 0.0] {
            return Err(format!("coordinates {coords} for lon {} lat {}", e.lon, e.lat));
        }
        let when = p.descendants().find(|n| n.has_tag_name("when")).and_then(|n| n.text()).ok_or("no timestamp")?;
        if when != e.date().format("%Y-%m-%d").to_string() {
            return Err(format!("timestamp {when}"));
        }
        let desc = p.descendants().find(|n| n.has_tag_name("description")).map(|n| n.text().unwrap_or(""));
        let legal: String = e.raw.report_text.chars().filter(|&c| xml_legal(c)).collect();
        if desc.is_none_or(|d| !legal.starts_with(d.trim_end_matches('…'))) {
            return Err(format!("description mismatch for {}", e.id()));
        }
    }
    Ok(())
}

fn xml_legal(c: char) -> bool {
    let u = c as u32;
    u == 0x9 || u == 0xA || u == 0xD || (0x20..=0xD7FF).contains(&u) || (0xE000..=0xFFFD).contains(&u) || u >= 0x10000
}
