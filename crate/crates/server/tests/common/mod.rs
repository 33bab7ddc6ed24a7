#![allow(dead_code)]

use eventmap::corpus::{synth_events, SynthProfile};
use eventmap::{Gazetteer, GeoEvent};

/// A small synthetic event set over Kansas.
pub fn small_events(total: usize, seed: u64) -> Vec<GeoEvent> {
    let profile = SynthProfile {
        total,
        years: [2004, 2006],
        n_counties: total.min(12),
        n_types: 4,
        zipf_exponent: 1.0,
        doc_len_mean: 16.0,
        year_weights: None,
    };
    synth_events(&profile, &Gazetteer::kansas(), seed).expect("valid profile")
}
