//! Held-in perplexity of fitted models with different topic counts, next to
//! the uniform baseline, which always scores the vocabulary size.
//!
//! ```bash
//! cargo run --release -p eventmap --example perplexity
//! ```

use eventmap::corpus::{corpus_from_events, synth_events};
use eventmap::lda::{fit_gibbs, perplexity};
use eventmap::{Gazetteer, LdaModel, LdaParams, Stopwords, SynthProfile, ThetaMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = SynthProfile { total: 600, n_counties: 30, n_types: 5, ..SynthProfile::kansas_2000_2011() };
    let events = synth_events(&profile, &Gazetteer::kansas(), 3)?;
    let corpus = corpus_from_events(&events, &Stopwords::english(), 1)?;
    let n = corpus.vocab_size();

    let uniform = LdaModel::new(1, 1.0, 0.01, vec![vec![1.0 / n as f64; n]], corpus.vocabulary.clone())?;
    let theta = ThetaMatrix(vec![vec![1.0]; corpus.num_docs()]);
    println!("uniform     perplexity {:>9.3} (vocabulary {n})", perplexity(&uniform, &theta, &corpus)?);

    for k in [1, 2, 5, 10] {
        let params = LdaParams { iterations: 200, burn_in: 100, ..LdaParams::new(k) };
        let (model, theta) = fit_gibbs(&corpus, &params)?;
        println!("K = {k:<2}      perplexity {:>9.3}", perplexity(&model, &theta, &corpus)?);
    }
    Ok(())
}
