//! Continuous-time dynamic topics: fit monthly epochs of a corpus whose
//! report vocabulary shifts halfway through, then follow one word's
//! probability in each topic over time.
//!
//! ```bash
//! cargo run --release -p eventmap --example dynamic_topics
//! ```

use chrono::NaiveDate;
use eventmap::corpus::days_since_epoch;
use eventmap::dyntopic::fit_cdtm;
use eventmap::{CdtmParams, Corpus, Document, Epochs, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let words = ["lab", "jars", "tubing", "dump", "creek", "shake", "bottle", "pot"];
    let vocabulary = Vocabulary::from_words(words.iter().map(|w| w.to_string()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // Topic A: labs, jars and tubing. Topic B starts as "dump"/"creek" and
    // drifts toward "shake"/"bottle" (one-pot waste) over six months.
    let mut documents = Vec::new();
    for month in 1..=6u32 {
        let shift = (month - 1) as f64 / 5.0;
        for _ in 0..30 {
            let b = rng.random_bool(0.5);
            let tokens: Vec<u32> = (0..25)
                .map(|_| {
                    if !b {
                        rng.random_range(0..3)
                    } else if rng.random_bool(shift) {
                        5 + rng.random_range(0..3)
                    } else {
                        3 + rng.random_range(0..2)
                    }
                })
                .collect();
            let date = NaiveDate::from_ymd_opt(2009, month, 15).unwrap();
            documents.push(Document { date, timestamp: days_since_epoch(date), year: 2009, ..Document::from_tokens(tokens) });
        }
    }
    let corpus = Corpus::new(vocabulary, documents);
    let epochs = Epochs::monthly(&corpus);

    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.01, max_iters: 40, seed: 2, ..CdtmParams::new(2) };
    let fit = fit_cdtm(&corpus, &epochs, &params)?;
    println!(
        "{} iterations, ELBO {:.2} -> {:.2}{}",
        fit.elbo_trace.len(),
        fit.elbo_trace[0],
        fit.elbo_trace.last().unwrap(),
        if fit.converged { " (converged)" } else { "" }
    );

    for k in 0..2 {
        println!("topic {k}");
        for (t, label) in epochs.labels.iter().enumerate() {
            let top: Vec<&str> = fit.model.top_words(t, k, 3).iter().map(|&w| words[w as usize]).collect();
            let p = fit.model.word_probs(t, k);
            println!("  {label}  dump {:.3}  shake {:.3}  top: {}", p[3], p[5], top.join(" "));
        }
    }
    Ok(())
}
