//! Fit LDA by collapsed Gibbs sampling to synthetic report text and print the
//! top words of each topic.
//!
//! ```bash
//! cargo run --release -p eventmap --example lda_topics
//! ```

use eventmap::corpus::{corpus_from_events, synth_events};
use eventmap::lda::fit_gibbs;
use eventmap::{Gazetteer, LdaParams, Stopwords, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = SynthProfile { total: 800, n_counties: 40, n_types: 6, ..SynthProfile::kansas_2000_2011() };
    let events = synth_events(&profile, &Gazetteer::kansas(), 7)?;
    let corpus = corpus_from_events(&events, &Stopwords::english(), 2)?;
    println!("{} documents, {} tokens, vocabulary {}", corpus.num_docs(), corpus.num_tokens(), corpus.vocab_size());

    // Fewer sweeps than the defaults keep this quick.
    let params = LdaParams { iterations: 300, burn_in: 150, seed: 1, ..LdaParams::new(6) };
    let (model, theta) = fit_gibbs(&corpus, &params)?;
    for k in 0..params.k {
        let words: Vec<&str> = model
            .top_words(k, 8)
            .into_iter()
            .filter_map(|w| corpus.vocabulary.word(w))
            .collect();
        let docs = (0..theta.num_docs()).filter(|&d| theta.argmax(d) == k).count();
        println!("topic {k} ({docs:>3} docs): {}", words.join(" "));
    }
    Ok(())
}
