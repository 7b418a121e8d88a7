//! Linear-chain CRF with word, suffix, shape and digit features, their
//! bigram conjunctions, and label-transition weights.
//!
//! Inference is exact (forward-backward, Viterbi) in log space. Training is
//! per-sequence SGD with a `1/(1 + decay*t)` step schedule and L2
//! regularization.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::senttok::LabeledSentence;

const BOS: &str = "<BOS>";
const FORMAT: &str = "claimaug-crf";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    WordIdentity,
    /// Last `k` characters (whole word when shorter).
    Suffix(u8),
    IsUppercaseInitial,
    IsAllUppercase,
    IsDigit,
}

impl FeatureKind {
    fn key(self) -> String {
        match self {
            FeatureKind::WordIdentity => "w".into(),
            FeatureKind::Suffix(k) => format!("suf{k}"),
            FeatureKind::IsUppercaseInitial => "capInit".into(),
            FeatureKind::IsAllUppercase => "allCap".into(),
            FeatureKind::IsDigit => "digit".into(),
        }
    }

    fn value(self, word: &str) -> String {
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        match self {
            FeatureKind::WordIdentity => word.to_string(),
            FeatureKind::Suffix(k) => {
                let n = word.chars().count();
                word.chars().skip(n.saturating_sub(k as usize)).collect()
            }
            FeatureKind::IsUppercaseInitial => flag(word.chars().next().is_some_and(char::is_uppercase)),
            FeatureKind::IsAllUppercase => flag(
                word.chars().any(char::is_alphabetic)
                    && word.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase),
            ),
            FeatureKind::IsDigit => flag(is_number(word)),
        }
    }
}

fn is_number(word: &str) -> bool {
    word.chars().any(|c| c.is_ascii_digit())
        && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureTemplate {
    pub kind: FeatureKind,
    /// Conjoin with the previous token's value of the same feature.
    pub bigram: bool,
}

impl FeatureTemplate {
    /// Every feature kind, as unigram and as bigram.
    pub fn default_set() -> Vec<FeatureTemplate> {
        let kinds = [
            FeatureKind::WordIdentity,
            FeatureKind::Suffix(1),
            FeatureKind::Suffix(2),
            FeatureKind::Suffix(3),
            FeatureKind::IsUppercaseInitial,
            FeatureKind::IsAllUppercase,
            FeatureKind::IsDigit,
        ];
        [false, true]
            .into_iter()
            .flat_map(|bigram| kinds.into_iter().map(move |kind| FeatureTemplate { kind, bigram }))
            .collect()
    }
}

/// Feature strings per position, in template order.
pub fn extract_features<S: AsRef<str>>(tokens: &[S], templates: &[FeatureTemplate]) -> Vec<Vec<String>> {
    (0..tokens.len())
        .map(|t| {
            templates
                .iter()
                .map(|tpl| {
                    let key = tpl.kind.key();
                    let cur = tpl.kind.value(tokens[t].as_ref());
                    if tpl.bigram {
                        let prev = if t == 0 {
                            BOS.to_string()
                        } else {
                            tpl.kind.value(tokens[t - 1].as_ref())
                        };
                        format!("{key}[-1]|{key}={prev}|{cur}")
                    } else {
                        format!("{key}={cur}")
                    }
                })
                .collect()
        })
        .collect()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A sentence with features mapped to attribute ids; unknown features are
/// dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub attrs: Vec<Vec<usize>>,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    labels: Vec<String>,
    templates: Vec<FeatureTemplate>,
    attributes: HashMap<String, usize>,
    attribute_names: Vec<String>,
    /// State weights `attr * L + label`, then `L * L` transition weights.
    weights: Vec<f64>,
    l2: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    labels: Vec<String>,
    templates: Vec<FeatureTemplate>,
    l2: f64,
    attributes: Vec<String>,
    weights: Vec<f64>,
}

/// Weight view with a global scale, used by SGD's lazy L2 shrinkage.
#[derive(Clone, Copy)]
struct Params<'a> {
    w: &'a [f64],
    scale: f64,
    n_labels: usize,
    trans_offset: usize,
}

impl Params<'_> {
    fn state(&self, attr: usize, y: usize) -> f64 {
        self.scale * self.w[attr * self.n_labels + y]
    }

    fn trans(&self, i: usize, j: usize) -> f64 {
        self.scale * self.w[self.trans_offset + i * self.n_labels + j]
    }

    fn emissions(&self, x: &Encoded) -> Vec<f64> {
        let l = self.n_labels;
        let mut e = vec![0.0; x.len() * l];
        for (t, attrs) in x.attrs.iter().enumerate() {
            for &a in attrs {
                for y in 0..l {
                    e[t * l + y] += self.state(a, y);
                }
            }
        }
        e
    }

    fn score(&self, x: &Encoded, y: &[usize]) -> f64 {
        let l = self.n_labels;
        let e = self.emissions(x);
        let mut s = 0.0;
        for t in 0..y.len() {
            s += e[t * l + y[t]];
            if t > 0 {
                s += self.trans(y[t - 1], y[t]);
            }
        }
        s
    }

    fn forward(&self, e: &[f64], n: usize) -> Vec<f64> {
        let l = self.n_labels;
        let mut alpha = vec![0.0; n * l];
        alpha[..l].copy_from_slice(&e[..l]);
        for t in 1..n {
            for j in 0..l {
                let prev = &alpha[(t - 1) * l..t * l];
                alpha[t * l + j] =
                    e[t * l + j] + log_sum_exp((0..l).map(|i| prev[i] + self.trans(i, j)));
            }
        }
        alpha
    }

    fn backward(&self, e: &[f64], n: usize) -> Vec<f64> {
        let l = self.n_labels;
        let mut beta = vec![0.0; n * l];
        for t in (0..n.saturating_sub(1)).rev() {
            for i in 0..l {
                let next = &beta[(t + 1) * l..(t + 2) * l];
                beta[t * l + i] = log_sum_exp(
                    (0..l).map(|j| self.trans(i, j) + e[(t + 1) * l + j] + next[j]),
                );
            }
        }
        beta
    }

    fn log_partition(&self, x: &Encoded) -> f64 {
        let n = x.len();
        if n == 0 {
            return 0.0;
        }
        let e = self.emissions(x);
        let alpha = self.forward(&e, n);
        log_sum_exp(alpha[(n - 1) * self.n_labels..].iter().copied())
    }

    /// NLL of `gold` (without L2) and, through `grad`, the sparse gradient
    /// `expected - empirical` scaled by `factor`.
    fn nll_with_gradient(
        &self,
        x: &Encoded,
        gold: &[usize],
        factor: f64,
        mut grad: impl FnMut(usize, f64),
    ) -> f64 {
        let n = x.len();
        if n == 0 {
            return 0.0;
        }
        let l = self.n_labels;
        let e = self.emissions(x);
        let alpha = self.forward(&e, n);
        let beta = self.backward(&e, n);
        let log_z = log_sum_exp(alpha[(n - 1) * l..].iter().copied());

        for t in 0..n {
            for y in 0..l {
                let mut g = (alpha[t * l + y] + beta[t * l + y] - log_z).exp();
                if y == gold[t] {
                    g -= 1.0;
                }
                if g != 0.0 {
                    for &a in &x.attrs[t] {
                        grad(a * l + y, factor * g);
                    }
                }
            }
            if t > 0 {
                for i in 0..l {
                    for j in 0..l {
                        let mut g = (alpha[(t - 1) * l + i]
                            + self.trans(i, j)
                            + e[t * l + j]
                            + beta[t * l + j]
                            - log_z)
                            .exp();
                        if i == gold[t - 1] && j == gold[t] {
                            g -= 1.0;
                        }
                        grad(self.trans_offset + i * l + j, factor * g);
                    }
                }
            }
        }
        log_z - self.score(x, gold)
    }

    /// Per-position label marginals.
    fn marginals(&self, x: &Encoded) -> Vec<Vec<f64>> {
        let n = x.len();
        let l = self.n_labels;
        if n == 0 {
            return Vec::new();
        }
        let e = self.emissions(x);
        let alpha = self.forward(&e, n);
        let beta = self.backward(&e, n);
        let log_z = log_sum_exp(alpha[(n - 1) * l..].iter().copied());
        (0..n)
            .map(|t| {
                (0..l)
                    .map(|y| (alpha[t * l + y] + beta[t * l + y] - log_z).exp())
                    .collect()
            })
            .collect()
    }

    /// Max-score path; among equal-scoring paths the lexicographically
    /// smallest label sequence wins. Runs the max-product recursion backward
    /// so the path can be read off front to back taking the lowest label
    /// that attains each maximum.
    fn viterbi(&self, x: &Encoded) -> Vec<usize> {
        let n = x.len();
        let l = self.n_labels;
        if n == 0 {
            return Vec::new();
        }
        let e = self.emissions(x);
        // beta[t*l + y]: best score of positions t.. given label y at t
        let mut beta = e.clone();
        for t in (0..n - 1).rev() {
            for i in 0..l {
                let best = (0..l)
                    .map(|j| self.trans(i, j) + beta[(t + 1) * l + j])
                    .fold(f64::NEG_INFINITY, f64::max);
                beta[t * l + i] += best;
            }
        }
        let first_max = |vals: &mut dyn Iterator<Item = f64>| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (y, v) in vals.enumerate() {
                if v > best_v {
                    best = y;
                    best_v = v;
                }
            }
            best
        };
        let mut path = Vec::with_capacity(n);
        path.push(first_max(&mut beta[..l].iter().copied()));
        for t in 1..n {
            let prev = path[t - 1];
            path.push(first_max(&mut (0..l).map(|j| self.trans(prev, j) + beta[t * l + j])));
        }
        path
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size at update `t` is `learning_rate / (1 + decay * t)`.
    pub decay: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 0.1,
            decay: 1e-4,
            l2: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.decay < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config(format!("invalid CRF training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full training objective (NLL + L2) after each epoch.
    pub epoch_objective: Vec<f64>,
}

impl CrfModel {
    pub fn new(labels: Vec<String>, templates: Vec<FeatureTemplate>) -> Self {
        let l = labels.len();
        CrfModel {
            labels,
            templates,
            attributes: HashMap::new(),
            attribute_names: Vec::new(),
            weights: vec![0.0; l * l],
            l2: 0.0,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn num_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn set_l2(&mut self, l2: f64) {
        self.l2 = l2;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn trans_offset(&self) -> usize {
        self.attribute_names.len() * self.labels.len()
    }

    /// Index of the state weight for (`attribute`, `label`).
    pub fn state_index(&self, attribute: &str, label: usize) -> Option<usize> {
        self.attributes.get(attribute).map(|a| a * self.labels.len() + label)
    }

    pub fn transition_index(&self, from: usize, to: usize) -> usize {
        self.trans_offset() + from * self.labels.len() + to
    }

    fn params(&self) -> Params<'_> {
        Params {
            w: &self.weights,
            scale: 1.0,
            n_labels: self.labels.len(),
            trans_offset: self.trans_offset(),
        }
    }

    /// Registers the features of `sentences` with zero weight.
    pub fn index_attributes<S: AsRef<str>>(&mut self, sentences: &[Vec<S>]) {
        let l = self.labels.len();
        let trans: Vec<f64> = self.weights[self.trans_offset()..].to_vec();
        let mut state = self.weights[..self.trans_offset()].to_vec();
        for tokens in sentences {
            for feats in extract_features(tokens, &self.templates) {
                for f in feats {
                    if !self.attributes.contains_key(&f) {
                        self.attributes.insert(f.clone(), self.attribute_names.len());
                        self.attribute_names.push(f);
                        state.extend(std::iter::repeat_n(0.0, l));
                    }
                }
            }
        }
        state.extend(trans);
        self.weights = state;
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Encoded {
        Encoded {
            attrs: extract_features(tokens, &self.templates)
                .into_iter()
                .map(|feats| feats.iter().filter_map(|f| self.attributes.get(f).copied()).collect())
                .collect(),
        }
    }

    pub fn label_ids<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.labels
                    .iter()
                    .position(|x| x == l.as_ref())
                    .ok_or_else(|| Error::Schema(format!("label `{}` not in CRF label set", l.as_ref())))
            })
            .collect()
    }

    pub fn score(&self, x: &Encoded, labels: &[usize]) -> f64 {
        self.params().score(x, labels)
    }

    pub fn log_partition(&self, x: &Encoded) -> f64 {
        self.params().log_partition(x)
    }

    pub fn marginals(&self, x: &Encoded) -> Vec<Vec<f64>> {
        self.params().marginals(x)
    }

    /// Negative log-likelihood plus `l2/2 * |w|^2`, and its dense gradient.
    pub fn nll_and_gradient(&self, x: &Encoded, gold: &[usize]) -> (f64, Vec<f64>) {
        let mut grad: Vec<f64> = self.weights.iter().map(|w| self.l2 * w).collect();
        let nll = self
            .params()
            .nll_with_gradient(x, gold, 1.0, |i, g| grad[i] += g);
        let reg = 0.5 * self.l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (nll + reg, grad)
    }

    pub fn viterbi(&self, x: &Encoded) -> Vec<usize> {
        self.params().viterbi(x)
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        self.viterbi(&self.encode(tokens))
            .into_iter()
            .map(|y| self.labels[y].clone())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            labels: self.labels.clone(),
            templates: self.templates.clone(),
            l2: self.l2,
            attributes: self.attribute_names.clone(),
            weights: self.weights.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format != FORMAT || f.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format {} v{}",
                f.format, f.version
            )));
        }
        let l = f.labels.len();
        if f.weights.len() != (f.attributes.len() + l) * l {
            return Err(Error::Validation("weight vector length does not match index".into()));
        }
        let attributes = f
            .attributes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(CrfModel {
            labels: f.labels,
            templates: f.templates,
            attributes,
            attribute_names: f.attributes,
            weights: f.weights,
            l2: f.l2,
        })
    }
}

/// Indexes the sentences' features and fits the weights by SGD.
pub fn train(model: &mut CrfModel, sentences: &[LabeledSentence], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if sentences.is_empty() {
        return Err(Error::Validation("empty CRF training set".into()));
    }
    let token_lists: Vec<Vec<&str>> = sentences.iter().map(|s| s.words().collect()).collect();
    model.index_attributes(&token_lists);
    model.l2 = config.l2;

    let data: Vec<(Encoded, Vec<usize>)> = sentences
        .iter()
        .zip(&token_lists)
        .map(|(s, toks)| Ok((model.encode(toks), model.label_ids(&s.token_labels)?)))
        .collect::<Result<_>>()?;

    let n = data.len() as f64;
    let n_labels = model.labels.len();
    let trans_offset = model.trans_offset();
    let mut v = std::mem::take(&mut model.weights);
    let mut scale = 1.0f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TrainReport::default();
    let mut step = 0u64;
    let mut updates: Vec<(usize, f64)> = Vec::new();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let lr = config.learning_rate / (1.0 + config.decay * step as f64);
            step += 1;
            updates.clear();
            let params = Params { w: &v, scale, n_labels, trans_offset };
            params.nll_with_gradient(x, y, 1.0, |k, g| updates.push((k, g)));
            scale *= 1.0 - lr * config.l2 / n;
            if scale <= 0.0 {
                return Err(Error::Divergence { epoch, value: scale });
            }
            for &(k, g) in &updates {
                v[k] -= lr * g / scale;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        let params = Params { w: &v, scale, n_labels, trans_offset };
        let nll: f64 = data
            .iter()
            .map(|(x, y)| params.log_partition(x) - params.score(x, y))
            .sum();
        let reg = 0.5 * config.l2 * scale * scale * v.iter().map(|w| w * w).sum::<f64>();
        let objective = nll + reg;
        if !objective.is_finite() {
            return Err(Error::Divergence { epoch, value: objective });
        }
        report.epoch_objective.push(objective);
    }
    v.iter_mut().for_each(|w| *w *= scale);
    model.weights = v;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelSchema};
    use rand::Rng;

    #[test]
    fn features_of_sibo() {
        let tpl: Vec<_> = FeatureTemplate::default_set().into_iter().filter(|t| !t.bigram).collect();
        let f = extract_features(&["Sibo"], &tpl);
        assert_eq!(
            f[0],
            ["w=Sibo", "suf1=o", "suf2=bo", "suf3=ibo", "capInit=1", "allCap=0", "digit=0"]
        );
        let f = extract_features(&["80"], &tpl);
        assert!(f[0].contains(&"digit=1".to_string()));
        assert!(f[0].contains(&"suf3=80".to_string()));
    }

    #[test]
    fn bigram_boundary() {
        let tpl = [FeatureTemplate { kind: FeatureKind::WordIdentity, bigram: true }];
        let f = extract_features(&["IBS", "have"], &tpl);
        assert_eq!(f[0], ["w[-1]|w=<BOS>|IBS"]);
        assert_eq!(f[1], ["w[-1]|w=IBS|have"]);
    }

    fn model_with(labels: usize, words: &[&str]) -> CrfModel {
        let mut m = CrfModel::new(
            (0..labels).map(|i| format!("L{i}")).collect(),
            FeatureTemplate::default_set(),
        );
        m.index_attributes(&[words.to_vec()]);
        m
    }

    #[test]
    fn zero_weights_uniform_partition() {
        let m = model_with(3, &["a", "b", "c", "d"]);
        let x = m.encode(&["a", "b", "c", "d"]);
        assert!((m.log_partition(&x) - 4.0 * 3f64.ln()).abs() < 1e-12);
        assert_eq!(m.viterbi(&x), [0, 0, 0, 0]);
    }

    #[test]
    fn single_label() {
        let mut m = model_with(1, &["a", "b"]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        m.weights_mut().iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        let x = m.encode(&["a", "b"]);
        assert!((m.log_partition(&x) - m.score(&x, &[0, 0])).abs() < 1e-12);
        assert_eq!(m.viterbi(&x), [0, 0]);
    }

    #[test]
    fn zero_weight_gradient_closed_form() {
        let m = model_with(3, &["x", "y", "z"]);
        let x = m.encode(&["x", "y", "z"]);
        let gold = [2, 0, 1];
        let (_, g) = m.nll_and_gradient(&x, &gold);
        for t in 0..3 {
            for &a in &x.attrs[t] {
                for y in 0..3 {
                    let count = x.attrs.iter().enumerate().filter(|(_, at)| at.contains(&a)).count() as f64;
                    let gold_count = x
                        .attrs
                        .iter()
                        .enumerate()
                        .filter(|(s, at)| at.contains(&a) && gold[*s] == y)
                        .count() as f64;
                    let expected = count / 3.0 - gold_count;
                    assert!((g[a * 3 + y] - expected).abs() < 1e-12);
                }
            }
        }
        // transitions: uniform pairwise marginal 1/9 per edge, 2 edges
        for i in 0..3 {
            for j in 0..3 {
                let emp = [(2, 0), (0, 1)].iter().filter(|&&p| p == (i, j)).count() as f64;
                assert!((g[m.transition_index(i, j)] - (2.0 / 9.0 - emp)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l2_only_on_untouched_weights() {
        let mut m = model_with(2, &["a", "b", "unused"]);
        m.set_l2(0.5);
        let idx = m.state_index("w=unused", 1).unwrap();
        m.weights_mut()[idx] = 0.8;
        let x = m.encode(&["a", "b"]);
        let (_, g) = m.nll_and_gradient(&x, &[0, 1]);
        assert_eq!(g[idx], 0.5 * 0.8);
    }

    #[test]
    fn marginals_sum_to_one() {
        let mut m = model_with(4, &["p", "q", "r"]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        m.weights_mut().iter_mut().for_each(|w| *w = rng.random_range(-2.0..2.0));
        let x = m.encode(&["p", "q", "r"]);
        for row in m.marginals(&x) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    fn sentences(rows: &[(&str, &str)]) -> Vec<LabeledSentence> {
        let schema = LabelSchema::new("O", ["CLA"]).unwrap();
        rows.iter()
            .enumerate()
            .map(|(i, (w, l))| {
                let w: Vec<&str> = w.split_whitespace().collect();
                let l: Vec<String> = l.split_whitespace().map(String::from).collect();
                let d = Document::from_tokens(format!("d{i}"), &w, l);
                LabeledSentence::from_labels(d.id.clone(), 0, d.tokens, d.token_labels, &schema)
            })
            .collect()
    }

    fn toy() -> Vec<LabeledSentence> {
        sentences(&[
            ("aspirin cures headaches", "CLA CLA CLA"),
            ("I went home", "O O O"),
            ("zinc cures colds", "CLA CLA CLA"),
            ("we went out", "O O O"),
            ("vitamin cures fatigue", "CLA CLA CLA"),
            ("they went away", "O O O"),
        ])
    }

    #[test]
    fn separable_toy_fits() {
        let data = toy();
        let mut m = CrfModel::new(vec!["O".into(), "CLA".into()], FeatureTemplate::default_set());
        let cfg = TrainConfig { epochs: 20, l2: 0.01, ..TrainConfig::default() };
        let report = train(&mut m, &data, &cfg).unwrap();
        assert_eq!(report.epoch_objective.len(), 20);
        for s in &data {
            let toks: Vec<&str> = s.words().collect();
            assert_eq!(m.predict(&toks), s.token_labels);
        }
        assert!(report.epoch_objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn single_sequence_memorized() {
        let data = sentences(&[("zinc cures colds fast", "CLA CLA O CLA")]);
        let mut m = CrfModel::new(vec!["O".into(), "CLA".into()], FeatureTemplate::default_set());
        let cfg = TrainConfig { epochs: 300, learning_rate: 0.5, decay: 0.0, l2: 0.0, seed: 1 };
        let report = train(&mut m, &data, &cfg).unwrap();
        assert!(*report.epoch_objective.last().unwrap() < 1e-3);
    }

    #[test]
    fn training_deterministic_and_serializable() {
        let data = toy();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let mut a = CrfModel::new(vec!["O".into(), "CLA".into()], FeatureTemplate::default_set());
        let mut b = a.clone();
        train(&mut a, &data, &cfg).unwrap();
        train(&mut b, &data, &cfg).unwrap();
        assert_eq!(a.weights(), b.weights());
        let c = CrfModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(c.weights(), a.weights());
        assert_eq!(c.predict(&["zinc", "cures"]), a.predict(&["zinc", "cures"]));
    }

    #[test]
    fn rejects_bad_config() {
        let mut m = CrfModel::new(vec!["O".into()], FeatureTemplate::default_set());
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(train(&mut m, &toy(), &cfg).is_err());
    }
}
