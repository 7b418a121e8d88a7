//! Softmax and adversarial gradients against central finite differences.

use claimaug::textclf::{fgsm_perturb, AdvConfig, SoftmaxClassifier};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn random_classifier(c: usize, d: usize, seed: u64) -> (SoftmaxClassifier, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SoftmaxClassifier::zeros((0..c).map(|i| format!("C{i}")).collect(), d);
    m.weights_mut().iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    m.bias_mut().iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
    let x = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (m, x)
}

fn close(numeric: f64, analytic: f64) -> bool {
    let denom = numeric.abs().max(analytic.abs());
    (numeric - analytic).abs() < 1e-8 || (numeric - analytic).abs() / denom < 1e-4
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn clean_gradient(seed in 0u64..100_000, c in 2usize..=5, y_pick in 0usize..5) {
        let (mut m, mut x) = random_classifier(c, 6, seed);
        let y = y_pick % c;
        let g = m.loss_and_gradients(&x, y);
        for k in 0..m.weights().len() {
            let orig = m.weights()[k];
            m.weights_mut()[k] = orig + H;
            let up = m.loss_and_gradients(&x, y).loss;
            m.weights_mut()[k] = orig - H;
            let down = m.loss_and_gradients(&x, y).loss;
            m.weights_mut()[k] = orig;
            prop_assert!(close((up - down) / (2.0 * H), g.weights[k]));
        }
        for k in 0..c {
            let orig = m.bias()[k];
            m.bias_mut()[k] = orig + H;
            let up = m.loss_and_gradients(&x, y).loss;
            m.bias_mut()[k] = orig - H;
            let down = m.loss_and_gradients(&x, y).loss;
            m.bias_mut()[k] = orig;
            prop_assert!(close((up - down) / (2.0 * H), g.bias[k]));
        }
        for j in 0..x.len() {
            let orig = x[j];
            x[j] = orig + H;
            let up = m.loss_and_gradients(&x, y).loss;
            x[j] = orig - H;
            let down = m.loss_and_gradients(&x, y).loss;
            x[j] = orig;
            prop_assert!(close((up - down) / (2.0 * H), g.input[j]));
        }
    }

    #[test]
    fn adversarial_gradient(seed in 0u64..100_000, w in 0.05f64..1.0) {
        let (mut m, x) = random_classifier(4, 6, seed);
        let adv = AdvConfig { epsilon: 0.05, adv_weight: w };
        let y = (seed % 4) as usize;
        let g = m.adversarial_loss_and_gradients(&x, y, &adv);
        let sign_of = |m: &SoftmaxClassifier| -> Vec<i8> {
            m.loss_and_gradients(&x, y).input.iter().map(|v| v.signum() as i8).collect()
        };
        let base_sign = sign_of(&m);
        for k in 0..m.weights().len() {
            let orig = m.weights()[k];
            m.weights_mut()[k] = orig + H;
            let up = m.adversarial_loss_and_gradients(&x, y, &adv).loss;
            let flip_up = sign_of(&m) != base_sign;
            m.weights_mut()[k] = orig - H;
            let down = m.adversarial_loss_and_gradients(&x, y, &adv).loss;
            let flip_down = sign_of(&m) != base_sign;
            m.weights_mut()[k] = orig;
            // the perturbation direction is piecewise constant; skip the
            // measure-zero case where a step crosses a sign boundary
            prop_assume!(!flip_up && !flip_down);
            prop_assert!(close((up - down) / (2.0 * H), g.weights[k]));
        }
    }

    #[test]
    fn probabilities_sum_to_one(seed in 0u64..100_000, c in 1usize..=6) {
        let (m, x) = random_classifier(c, 5, seed);
        let p = m.probabilities(&x);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fgsm_radius(seed in 0u64..100_000, eps in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = (0..8).map(|i| if i % 3 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let p = fgsm_perturb(&x, &g, eps);
        for i in 0..8 {
            let dist = (p[i] - x[i]).abs();
            prop_assert!(dist <= eps + 1e-12);
            if g[i] != 0.0 {
                prop_assert!((dist - eps).abs() < 1e-12);
            } else {
                prop_assert_eq!(p[i], x[i]);
            }
        }
    }

    #[test]
    fn fgsm_does_not_decrease_loss(seed in 0u64..100_000) {
        let (m, x) = random_classifier(3, 6, seed);
        let y = (seed % 3) as usize;
        let g = m.loss_and_gradients(&x, y);
        prop_assume!(g.input.iter().any(|v| *v != 0.0));
        let p = fgsm_perturb(&x, &g.input, 1e-3);
        prop_assert!(m.loss_and_gradients(&p, y).loss >= g.loss - 1e-6);
    }
}
