//! CRF inference against brute-force enumeration and gradients against
//! central finite differences.

use claimaug::crf::{CrfModel, Encoded, FeatureTemplate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: [&str; 6] = ["Zinc", "cures", "colds", "IBS", "80", "%"];

fn random_model(n_labels: usize, seed: u64, scale: f64) -> CrfModel {
    let mut m = CrfModel::new(
        (0..n_labels).map(|i| format!("L{i}")).collect(),
        FeatureTemplate::default_set(),
    );
    let all: Vec<Vec<&str>> = VOCAB
        .iter()
        .flat_map(|a| VOCAB.iter().map(move |b| vec![*a, *b]))
        .collect();
    m.index_attributes(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    m.weights_mut()
        .iter_mut()
        .for_each(|w| *w = rng.random_range(-scale..scale));
    m
}

fn sentence(seed: u64, len: usize) -> Vec<&'static str> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect()
}

/// Every label sequence of length `n` over `l` labels, lexicographic.
fn all_paths(l: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn brute_log_z(m: &CrfModel, x: &Encoded) -> f64 {
    let scores: Vec<f64> = all_paths(m.labels().len(), x.len())
        .iter()
        .map(|p| m.score(x, p))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn brute_argmax(m: &CrfModel, x: &Encoded) -> Vec<usize> {
    let mut best = None::<(f64, Vec<usize>)>;
    for p in all_paths(m.labels().len(), x.len()) {
        let s = m.score(x, &p);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    best.unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn partition_matches_enumeration(seed in 0u64..10_000, n in 1usize..=5, l in 1usize..=3) {
        let m = random_model(l, seed, 1.5);
        let x = m.encode(&sentence(seed, n));
        let got = m.log_partition(&x);
        let want = brute_log_z(&m, &x);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn viterbi_matches_enumeration(seed in 0u64..10_000, n in 1usize..=5, l in 1usize..=3) {
        let m = random_model(l, seed, 1.5);
        let x = m.encode(&sentence(seed, n));
        prop_assert_eq!(m.viterbi(&x), brute_argmax(&m, &x));
    }

    #[test]
    fn marginals_match_enumeration(seed in 0u64..10_000, n in 1usize..=4) {
        let m = random_model(3, seed, 1.0);
        let x = m.encode(&sentence(seed, n));
        let log_z = brute_log_z(&m, &x);
        let mut want = vec![vec![0.0; 3]; n];
        for p in all_paths(3, n) {
            let prob = (m.score(&x, &p) - log_z).exp();
            for (t, &y) in p.iter().enumerate() {
                want[t][y] += prob;
            }
        }
        for (g, w) in m.marginals(&x).iter().zip(&want) {
            for (a, b) in g.iter().zip(w) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in 0u64..10_000, n in 1usize..=4, l2 in 0.0f64..2.0) {
        let mut m = random_model(3, seed, 1.0);
        m.set_l2(l2);
        let toks = sentence(seed, n);
        let x = m.encode(&toks);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let (_, grad) = m.nll_and_gradient(&x, &gold);

        // check every weight the sentence touches plus all transitions
        let mut touched: Vec<usize> = x.attrs.iter().flatten().flat_map(|a| (0..3).map(move |y| a * 3 + y)).collect();
        touched.extend((0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m.transition_index(i, j)));
        touched.sort();
        touched.dedup();
        let h = 1e-5;
        for k in touched {
            let orig = m.weights()[k];
            m.weights_mut()[k] = orig + h;
            let up = m.nll_and_gradient(&x, &gold).0;
            m.weights_mut()[k] = orig - h;
            let down = m.nll_and_gradient(&x, &gold).0;
            m.weights_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-8);
            prop_assert!(rel < 1e-5 || (numeric - grad[k]).abs() < 1e-7, "w[{k}]: {numeric} vs {}", grad[k]);
        }
    }
}

#[test]
fn zero_weight_partition_closed_form() {
    for l in 1..=4 {
        for n in 1..=4 {
            let mut m = random_model(l, 0, 1.0);
            m.weights_mut().iter_mut().for_each(|w| *w = 0.0);
            let x = m.encode(&sentence(n as u64, n));
            let want = n as f64 * (l as f64).ln();
            assert!((m.log_partition(&x) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn empty_sentence_is_trivial() {
    let m = random_model(2, 3, 1.0);
    let x = m.encode::<&str>(&[]);
    assert_eq!(m.log_partition(&x), 0.0);
    assert!(m.viterbi(&x).is_empty());
}

#[test]
fn unseen_features_are_ignored() {
    let m = random_model(2, 4, 1.0);
    let x = m.encode(&["neverseen", "tokens"]);
    // only the shape features survive
    assert!(x.attrs.iter().all(|a| a.len() < FeatureTemplate::default_set().len()));
    assert!(m.log_partition(&x).is_finite());
}
