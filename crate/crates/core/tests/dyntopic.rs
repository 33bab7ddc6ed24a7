mod support;

use eventmap::corpus::Corpus;
use eventmap::dyntopic::*;
use eventmap::lda::{self, LdaParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(v: &[(f64, f64)]) -> Vec<Option<Observation>> {
    v.iter().map(|&(value, variance)| Some(Observation { value, variance })).collect()
}

#[test]
fn single_step_bayes_update() {
    let f = kalman_forward(&obs(&[(2.0, 0.5)]), &[10.0], 0.3, 1.5).unwrap();
    assert!((f.means[0] - 2.0 * 1.5 / 2.0).abs() < 1e-15);
    let s = kalman_smooth(&f, &[10.0], 0.3).unwrap();
    assert_eq!(s.means, f.means);
    assert_eq!(s.variances, f.variances);
}

#[test]
fn frozen_chain_matches_static_mean_posterior() {
    let t = 4;
    let (y, r, v0) = (1.3, 0.4, 2.0);
    let times: Vec<f64> = (0..t).map(|i| i as f64 * 7.0).collect();
    let f = kalman_forward(&obs(&vec![(y, r); t]), &times, 0.0, v0).unwrap();
    let expected = y * (t as f64 * v0) / (t as f64 * v0 + r);
    assert!((f.means[t - 1] - expected).abs() < 1e-12);
}

#[test]
fn only_rate_times_gap_matters() {
    let data = obs(&[(0.3, 0.2), (-0.5, 0.1), (1.0, 0.7)]);
    let a = kalman_forward(&data, &[0.0, 5.0, 11.0], 0.4, 1.0).unwrap();
    let b = kalman_forward(&data, &[0.0, 10.0, 22.0], 0.2, 1.0).unwrap();
    for i in 0..3 {
        assert!((a.means[i] - b.means[i]).abs() < 1e-14);
        assert!((a.variances[i] - b.variances[i]).abs() < 1e-14);
    }
}

#[test]
fn nonmonotone_times_and_length_mismatch_are_errors() {
    let data = obs(&[(0.0, 1.0), (0.0, 1.0)]);
    assert!(matches!(kalman_forward(&data, &[1.0, 1.0], 0.1, 1.0), Err(DynTopicError::NonMonotoneTimes(1))));
    let f = kalman_forward(&data, &[0.0, 1.0], 0.1, 1.0).unwrap();
    assert!(matches!(kalman_smooth(&f, &[0.0, 1.0, 2.0], 0.1), Err(DynTopicError::LengthMismatch(_))));
}

#[test]
fn smoother_matches_dense_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let t = 1 + case % 5;
        let mut times = vec![rng.random_range(0.0..10.0)];
        for _ in 1..t {
            let last = *times.last().unwrap();
            times.push(last + rng.random_range(0.5..40.0));
        }
        let sigma2 = if case % 7 == 0 { 0.0 } else { rng.random_range(0.001..0.5) };
        let v0 = rng.random_range(0.1..3.0);
        let data: Vec<Option<(f64, f64)>> = (0..t)
            .map(|_| (rng.random::<f64>() > 0.2).then(|| (rng.random_range(-3.0..3.0), rng.random_range(0.05..2.0))))
            .collect();
        let o: Vec<Option<Observation>> = data.iter().map(|d| d.map(|(value, variance)| Observation { value, variance })).collect();
        let f = kalman_forward(&o, &times, sigma2, v0).unwrap();
        let s = kalman_smooth(&f, &times, sigma2).unwrap();
        let (m, v) = support::dense_conditioning(&times, &data, sigma2, v0);
        for i in 0..t {
            assert!((s.means[i] - m[i]).abs() < 1e-8, "case {case} mean {i}");
            assert!((s.variances[i] - v[i]).abs() < 1e-8, "case {case} var {i}");
            assert!(s.variances[i] <= f.variances[i] + 1e-12);
        }
    }
}

#[test]
fn huge_process_variance_decouples_times() {
    let data = obs(&[(0.7, 1e-3), (-2.0, 1e-3), (3.0, 1e-3)]);
    let times = [0.0, 30.0, 60.0];
    let f = kalman_forward(&data, &times, 1e12, 1e12).unwrap();
    let s = kalman_smooth(&f, &times, 1e12).unwrap();
    for (m, (y, _)) in s.means.iter().zip([(0.7, 0.0), (-2.0, 0.0), (3.0, 0.0)]) {
        assert!((m - y).abs() < 1e-6);
    }
}

#[test]
fn empty_epoch_insertion_leaves_marginals_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let times = [3.0, 40.0, 75.0, 130.0];
        let data: Vec<Option<Observation>> = (0..4)
            .map(|_| Some(Observation { value: rng.random_range(-2.0..2.0), variance: rng.random_range(0.1..1.0) }))
            .collect();
        let (sigma2, v0) = (rng.random_range(0.0..0.2), rng.random_range(0.2..2.0));
        let base = kalman_smooth(&kalman_forward(&data, &times, sigma2, v0).unwrap(), &times, sigma2).unwrap();
        let at = rng.random_range(0..3);
        let inserted = rng.random_range(times[at] + 0.1..times[at + 1] - 0.1);
        let mut t2 = times.to_vec();
        let mut d2 = data.clone();
        t2.insert(at + 1, inserted);
        d2.insert(at + 1, None);
        let refined = kalman_smooth(&kalman_forward(&d2, &t2, sigma2, v0).unwrap(), &t2, sigma2).unwrap();
        let keep: Vec<usize> = (0..5).filter(|&i| i != at + 1).collect();
        for (i, &j) in keep.iter().enumerate() {
            assert!((base.means[i] - refined.means[j]).abs() < 1e-8);
            assert!((base.variances[i] - refined.variances[j]).abs() < 1e-8);
        }
    }
}

#[test]
fn word_probs_softmax() {
    let p = expected_word_probs(&[1f64.ln(), 2f64.ln(), 3f64.ln()], &[0.0; 3]);
    for (a, b) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let u = expected_word_probs(&[4.0; 5], &[0.3; 5]);
    assert!(u.iter().all(|x| (x - 0.2).abs() < 1e-15));
    let big = expected_word_probs(&[1000.0, 999.0], &[0.0, 2.0]);
    assert!((big[0] - 0.5).abs() < 1e-12);
}

#[test]
fn word_probs_match_unshifted_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let m: Vec<f64> = (0..7).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..2.0)).collect();
        let raw: Vec<f64> = m.iter().zip(&v).map(|(a, b)| (a + b / 2.0).exp()).collect();
        let s: f64 = raw.iter().sum();
        for (p, r) in expected_word_probs(&m, &v).iter().zip(&raw) {
            assert!((p - r / s).abs() < 1e-14);
        }
    }
}

#[test]
fn e_step_single_topic_and_zero_probability() {
    let docs: Vec<&[u32]> = vec![&[0, 1, 1, 2]];
    let one = e_step_epoch(&docs, &[vec![0.2, 0.5, 0.3]], 0.7, None);
    assert!(one.phi[0].iter().all(|&p| p == 1.0));
    assert!((one.gamma[0][0] - 4.7).abs() < 1e-12);

    let pi = vec![vec![0.0, 0.6, 0.4], vec![0.5, 0.3, 0.2]];
    let e = e_step_epoch(&docs, &pi, 0.5, None);
    assert_eq!(e.phi[0][0], 0.0);
    for row in e.phi[0].chunks(2) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let total: f64 = e.counts.iter().sum();
    assert!((total - 4.0).abs() < 1e-12);
}

#[test]
fn e_step_two_token_fixed_point() {
    let pi = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
    for (w1, w2, alpha) in [(0u32, 1u32, 0.5), (1, 1, 0.1), (0, 0, 2.0)] {
        let tokens = [w1, w2];
        let e = e_step_epoch(&[&tokens[..]], &pi, alpha, None);
        let (phi, gamma) = support::mean_field_fixed_point(&[w1 as usize, w2 as usize], &pi, alpha);
        for k in 0..2 {
            assert!((e.gamma[0][k] - gamma[k]).abs() < 1e-5);
            for n in 0..2 {
                assert!((e.phi[0][n * 2 + k] - phi[n][k]).abs() < 1e-5);
            }
        }
    }
}

fn random_problem_state(rng: &mut ChaCha8Rng, t: usize, k: usize, nw: usize) -> (Corpus, Epochs, Vec<f64>, Vec<f64>, Vec<f64>) {
    let docs: Vec<Vec<u32>> = (0..t).map(|_| (0..5).map(|_| rng.random_range(0..nw as u32)).collect()).collect();
    let corpus = Corpus::from_token_ids(support::vocab(nw), docs);
    let times: Vec<f64> = (0..t).map(|i| 10.0 + 25.0 * i as f64).collect();
    let epochs = Epochs::new(times, (0..t).map(|i| i.to_string()).collect(), (0..t).map(|i| vec![i]).collect()).unwrap();
    let n = t * k * nw;
    let counts = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
    let beta_hat = (0..n).map(|_| rng.random_range(-3.0..1.0)).collect();
    let obs_var = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    (corpus, epochs, counts, beta_hat, obs_var)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for sigma2 in [0.0, 0.01, 0.3] {
        let (corpus, epochs, counts, beta_hat, obs_var) = random_problem_state(&mut rng, 2, 2, 3);
        let problem = Problem { corpus: &corpus, epochs: &epochs, k: 2, alpha: 0.5, sigma2_rate: sigma2, v0: 1.0 };
        let grad = pseudo_gradient(&problem, &counts, &beta_hat, &obs_var).unwrap();
        let h = 1e-5;
        for i in 0..beta_hat.len() {
            let mut up = beta_hat.clone();
            let mut down = beta_hat.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (pseudo_objective(&problem, &counts, &up, &obs_var).unwrap()
                - pseudo_objective(&problem, &counts, &down, &obs_var).unwrap())
                / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-4, "sigma2 {sigma2} index {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn perturbed_pseudo_observation_moves_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (corpus, epochs, counts, beta_hat, obs_var) = random_problem_state(&mut rng, 2, 2, 3);
    let problem = Problem { corpus: &corpus, epochs: &epochs, k: 2, alpha: 0.5, sigma2_rate: 0.01, v0: 1.0 };
    let mut state = VariationalState {
        beta_hat,
        obs_var,
        phi: vec![Vec::new(); 2],
        gamma: vec![vec![1.0; 2]; 2],
        tokens_per_epoch: vec![5, 5],
    };
    for _ in 0..2000 {
        let r = update_pseudo_observations(&problem, &counts, &mut state).unwrap();
        if r.after - r.before < 1e-13 {
            break;
        }
    }
    let optimum = state.beta_hat.clone();
    let best = pseudo_objective(&problem, &counts, &optimum, &state.obs_var).unwrap();
    let g = pseudo_gradient(&problem, &counts, &optimum, &state.obs_var).unwrap();
    assert!(g.iter().all(|x| x.abs() < 1e-5), "{g:?}");

    state.beta_hat[4] += 0.5;
    let perturbed = pseudo_objective(&problem, &counts, &state.beta_hat, &state.obs_var).unwrap();
    assert!(perturbed < best);
    let r = update_pseudo_observations(&problem, &counts, &mut state).unwrap();
    assert!(r.after > r.before);
    assert!((state.beta_hat[4] - optimum[4]).abs() < 0.5);
}

#[test]
fn zero_gradient_leaves_pseudo_observations_unchanged() {
    // One chain at one time with prior mean zero and no counts: β̂ = 0 is optimal.
    let corpus = Corpus::from_token_ids(support::vocab(1), vec![vec![]]);
    let epochs = Epochs::single(&corpus);
    let problem = Problem { corpus: &corpus, epochs: &epochs, k: 1, alpha: 1.0, sigma2_rate: 0.0, v0: 1.0 };
    let mut state = VariationalState {
        beta_hat: vec![0.0],
        obs_var: vec![1.0],
        phi: vec![Vec::new()],
        gamma: vec![vec![1.0]],
        tokens_per_epoch: vec![0],
    };
    let r = update_pseudo_observations(&problem, &[0.0], &mut state).unwrap();
    assert_eq!(state.beta_hat, vec![0.0]);
    assert_eq!(r.before, r.after);
}

#[test]
fn elbo_below_exact_evidence() {
    for (w1, w2, alpha, v0) in [(0u32, 1u32, 1.0, 1.0), (1, 1, 0.5, 2.0), (0, 0, 3.0, 0.5)] {
        let corpus = Corpus::from_token_ids(support::vocab(2), vec![vec![w1, w2]]);
        let epochs = Epochs::single(&corpus);
        let params = CdtmParams { alpha, v0, init_sweeps: 10, ..CdtmParams::new(2) };
        let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();
        let problem = Problem { corpus: &corpus, epochs: &epochs, k: 2, alpha, sigma2_rate: params.sigma2_rate, v0 };
        let exact = support::exact_log_evidence_two_tokens(w1 as usize, w2 as usize, alpha, v0);
        let bound = elbo(&problem, &fit.state).unwrap();
        assert!(bound <= exact + 1e-9, "{bound} > {exact}");
        // Arbitrary states are bounded too.
        let mut rng = ChaCha8Rng::seed_from_u64(w1 as u64 * 2 + w2 as u64);
        for _ in 0..50 {
            let mut s = fit.state.clone();
            s.beta_hat.iter_mut().for_each(|b| *b = rng.random_range(-3.0..3.0));
            s.obs_var.iter_mut().for_each(|v| *v = rng.random_range(0.05..3.0));
            let a: f64 = rng.random();
            s.phi[0] = vec![a, 1.0 - a, 1.0 - a, a];
            s.gamma[0] = vec![rng.random_range(0.1..4.0), rng.random_range(0.1..4.0)];
            assert!(elbo(&problem, &s).unwrap() <= exact + 1e-9);
        }
    }
}

#[test]
fn elbo_invariant_under_relabeling() {
    let (corpus, epochs, _) = support::drift_corpus(5, 20, 4);
    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.01, max_iters: 3, init_sweeps: 20, ..CdtmParams::new(3) };
    let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();
    let problem = Problem { corpus: &corpus, epochs: &epochs, k: 3, alpha: 0.5, sigma2_rate: 0.01, v0: 1.0 };
    let a = elbo(&problem, &fit.state).unwrap();
    let b = elbo(&problem, &fit.state.permute_topics(&problem, &[2, 0, 1])).unwrap();
    assert!((a - b).abs() < 1e-9 * a.abs());
}

#[test]
fn drift_fit_is_monotone_and_tracks_swap() {
    let (corpus, epochs, _) = support::drift_corpus(40, 40, 1);
    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.01, max_iters: 60, init_sweeps: 100, seed: 3, ..CdtmParams::new(2) };
    let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();
    for w in fit.elbo_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "ELBO decreased: {} -> {}", w[0], w[1]);
    }
    for t in 0..6 {
        for k in 0..2 {
            assert!((fit.model.word_probs(t, k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    for phi in &fit.state.phi {
        for row in phi.chunks(2) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    let drifting = (0..2).find(|&k| {
        let p = fit.model.word_probs(0, k);
        p[3] + p[4] > p[0] + p[1]
    });
    let k = drifting.expect("a topic over words 3-5");
    assert_eq!(fit.model.top_words(0, k, 1), vec![3]);
    assert_eq!(fit.model.top_words(5, k, 1), vec![4]);
}

#[test]
fn frozen_dynamics_give_epoch_constant_topics() {
    let (corpus, epochs, _) = support::drift_corpus(10, 30, 2);
    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.0, max_iters: 10, init_sweeps: 30, ..CdtmParams::new(2) };
    let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();
    for k in 0..2 {
        let first = fit.model.word_probs(0, k).to_vec();
        for t in 1..6 {
            for (a, b) in fit.model.word_probs(t, k).iter().zip(&first) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn single_epoch_matches_variational_lda() {
    let model = lda::LdaModel::new(
        2,
        0.5,
        0.01,
        vec![
            vec![0.4, 0.3, 0.2, 0.05, 0.03, 0.02],
            vec![0.02, 0.03, 0.05, 0.2, 0.3, 0.4],
        ],
        support::vocab(6),
    )
    .unwrap();
    let sampled = lda::sample_corpus(&model, 200, lda::DocLength::Fixed(50), 9).unwrap();
    let corpus = sampled.corpus;
    let epochs = Epochs::single(&corpus);
    let params = CdtmParams { alpha: 0.5, max_iters: 100, init_sweeps: 100, ..CdtmParams::new(2) };
    let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();

    let (init, _) = lda::fit_gibbs(&corpus, &LdaParams { iterations: 100, burn_in: 50, ..LdaParams { alpha: 0.5, ..LdaParams::new(2) } }).unwrap();
    let docs: Vec<Vec<u32>> = corpus.documents.iter().map(|d| d.tokens.clone()).collect();
    let reference = support::variational_lda(&docs, 6, 0.5, &init.beta, 50);
    let learned: Vec<Vec<f64>> = (0..2).map(|k| fit.model.word_probs(0, k).to_vec()).collect();
    let matching = lda::greedy_topic_matching(&learned, &reference);
    for k in 0..2 {
        let d = lda::l1_distance(&learned[k], &reference[matching[k]]);
        assert!(d <= 0.05, "topic {k}: L1 {d}");
    }
}

#[test]
fn model_json_round_trip() {
    let (corpus, epochs, _) = support::drift_corpus(4, 10, 6);
    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.01, max_iters: 2, init_sweeps: 10, ..CdtmParams::new(2) };
    let fit = fit_cdtm(&corpus, &epochs, &params).unwrap();
    let bytes = fit.model.to_json();
    let back = CdtmModel::from_json(&bytes).unwrap();
    assert_eq!(back, fit.model);
    assert_eq!(back.to_json(), bytes);
    let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    for key in ["k", "times", "sigma2_rate", "v0", "m", "V"] {
        assert!(value.get(key).is_some(), "{key}");
    }
}

#[test]
fn fit_is_deterministic() {
    let (corpus, epochs, _) = support::drift_corpus(5, 15, 7);
    let params = CdtmParams { alpha: 0.5, sigma2_rate: 0.01, max_iters: 5, init_sweeps: 10, seed: 42, ..CdtmParams::new(2) };
    let a = fit_cdtm(&corpus, &epochs, &params).unwrap();
    let b = fit_cdtm(&corpus, &epochs, &params).unwrap();
    assert_eq!(a.model.to_json(), b.model.to_json());
}
