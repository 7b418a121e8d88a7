//! Bag-of-embeddings softmax sentence classifier with optional adversarial
//! training in embedding space.
//!
//! A sentence is the mean of its (lowercased) token embeddings. Adversarial
//! examples are single FGSM steps on that mean: `x + eps * sign(dL/dx)`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::LabelSchema;
use crate::error::{Error, Result};
use crate::senttok::LabeledSentence;

const FORMAT: &str = "claimaug-textclf";
const FORMAT_VERSION: u32 = 1;

fn key(token: &str) -> String {
    token.to_lowercase()
}

/// Row 0 is the out-of-vocabulary row; known tokens follow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    matrix: Vec<f64>,
    pub trainable: bool,
}

impl EmbeddingTable {
    fn from_parts(dim: usize, tokens: Vec<String>, matrix: Vec<f64>, trainable: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if matrix.len() != (tokens.len() + 1) * dim {
            return Err(Error::Validation("embedding matrix size does not match vocabulary".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite embedding entry".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i + 1)).collect();
        Ok(EmbeddingTable { dim, tokens, index, matrix, trainable })
    }

    /// Seeded standard-normal rows for every distinct lowercased token, in
    /// first-seen order, plus the OOV row.
    pub fn random<'a>(tokens: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Result<Self> {
        let mut vocab = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in tokens {
            let k = key(t);
            if seen.insert(k.clone()) {
                vocab.push(k);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = (0..(vocab.len() + 1) * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self::from_parts(dim, vocab, matrix, false)
    }

    /// Vectors for the tokens of `sentences`.
    pub fn for_sentences(sentences: &[LabeledSentence], dim: usize, seed: u64) -> Result<Self> {
        Self::random(sentences.iter().flat_map(|s| s.words()), dim, seed)
    }

    /// `token v1 ... vd` per line. The OOV row is zero.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "invalid UTF-8"))?;
        let mut dim = None;
        let mut tokens = Vec::new();
        let mut rows = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(tok) = fields.next() else { continue };
            let vals: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{f}`"))))
                .collect::<Result<_>>()?;
            match dim {
                None if vals.is_empty() => return Err(Error::parse(i + 1, "no vector values")),
                None => dim = Some(vals.len()),
                Some(d) if d != vals.len() => {
                    return Err(Error::parse(i + 1, format!("expected {d} values, got {}", vals.len())))
                }
                _ => {}
            }
            if !seen.insert(key(tok)) {
                return Err(Error::parse(i + 1, format!("duplicate token `{tok}`")));
            }
            tokens.push(key(tok));
            rows.push(vals);
        }
        let dim = dim.ok_or_else(|| Error::parse(0, "empty embedding file"))?;
        let mut matrix = vec![0.0; dim];
        for r in rows {
            matrix.extend(r);
        }
        Self::from_parts(dim, tokens, matrix, false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Row index of `token`, 0 when unknown.
    pub fn row_of(&self, token: &str) -> usize {
        self.index.get(&key(token)).copied().unwrap_or(0)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i + 1)).collect();
    }
}

/// Mean of the token rows; zero vector for an empty sentence.
pub fn embed_sentence<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut x = vec![0.0; table.dim];
    if tokens.is_empty() {
        return x;
    }
    for t in tokens {
        for (xi, v) in x.iter_mut().zip(table.row(table.row_of(t.as_ref()))) {
            *xi += v;
        }
    }
    let n = tokens.len() as f64;
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// `x + epsilon * sign(grad)`, with `sign(0) = 0`.
pub fn fgsm_perturb(x: &[f64], grad: &[f64], epsilon: f64) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &g)| {
            if g > 0.0 {
                xi + epsilon
            } else if g < 0.0 {
                xi - epsilon
            } else {
                xi
            }
        })
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    classes: Vec<String>,
    dim: usize,
    /// Row-major `C x d`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradients of one example's loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// With respect to the sentence embedding.
    pub input: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(classes: Vec<String>, dim: usize) -> Self {
        let c = classes.len();
        SoftmaxClassifier { classes, dim, weights: vec![0.0; c * dim], bias: vec![0.0; c] }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let w = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Highest-scoring class index; ties go to the earlier class.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        best
    }

    /// Cross-entropy of class `y` at input `x`.
    pub fn loss_and_gradients(&self, x: &[f64], y: usize) -> Gradients {
        let d = self.dim;
        let z = self.logits(x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let mut delta: Vec<f64> = z.iter().map(|v| (v - log_sum).exp()).collect();
        delta[y] -= 1.0;
        let mut weights = vec![0.0; self.weights.len()];
        let mut input = vec![0.0; d];
        for (c, &dc) in delta.iter().enumerate() {
            for j in 0..d {
                weights[c * d + j] = dc * x[j];
                input[j] += dc * self.weights[c * d + j];
            }
        }
        Gradients { loss: log_sum - z[y], weights, bias: delta, input }
    }

    /// Clean loss mixed with the loss at the FGSM point. The perturbation
    /// direction is treated as constant, as in the training update.
    pub fn adversarial_loss_and_gradients(&self, x: &[f64], y: usize, adv: &AdvConfig) -> Gradients {
        let clean = self.loss_and_gradients(x, y);
        if !adv.is_active() {
            return clean;
        }
        let x_adv = fgsm_perturb(x, &clean.input, adv.epsilon);
        let pert = self.loss_and_gradients(&x_adv, y);
        let w = adv.adv_weight;
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(p, q)| (1.0 - w) * p + w * q).collect()
        };
        Gradients {
            loss: (1.0 - w) * clean.loss + w * pert.loss,
            weights: mix(&clean.weights, &pert.weights),
            bias: mix(&clean.bias, &pert.bias),
            input: mix(&clean.input, &pert.input),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvConfig {
    /// L-infinity radius of the perturbation.
    pub epsilon: f64,
    /// Weight of the adversarial loss, in `[0, 1]`.
    pub adv_weight: f64,
}

impl AdvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 || !(0.0..=1.0).contains(&self.adv_weight) {
            return Err(Error::Config(format!("invalid adversarial config {self:?}")));
        }
        Ok(())
    }

    /// With zero radius or zero weight the adversarial term equals the clean
    /// loss, so it is skipped and training is exactly clean training.
    pub fn is_active(&self) -> bool {
        self.epsilon > 0.0 && self.adv_weight > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClfTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub dim: usize,
    /// Update embedding rows as well as the softmax layer.
    pub train_embeddings: bool,
}

impl Default for ClfTrainConfig {
    fn default() -> Self {
        ClfTrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
            dim: 32,
            train_embeddings: true,
        }
    }
}

impl ClfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.l2 < 0.0 || self.dim == 0 {
            return Err(Error::Config(format!("invalid classifier config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextClassifier {
    pub table: EmbeddingTable,
    pub softmax: SoftmaxClassifier,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TextClassifier,
}

impl TextClassifier {
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> &str {
        let c = self.softmax.predict_index(&embed_sentence(tokens, &self.table));
        &self.softmax.classes[c]
    }

    pub fn predict_sentences(&self, sentences: &[LabeledSentence]) -> Vec<String> {
        sentences
            .iter()
            .map(|s| {
                let w: Vec<&str> = s.words().collect();
                self.predict(&w).to_string()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format != FORMAT || f.version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported model format {} v{}", f.format, f.version)));
        }
        let mut m = f.model;
        m.table.reindex();
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClfReport {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Trains on sentence labels. The embedding table covers the training
/// tokens and is drawn from `config.seed`.
pub fn train_classifier(
    sentences: &[LabeledSentence],
    schema: &LabelSchema,
    config: &ClfTrainConfig,
    adv: &AdvConfig,
) -> Result<(TextClassifier, ClfReport)> {
    let table = EmbeddingTable::for_sentences(sentences, config.dim, config.seed)?;
    train_with_table(sentences, schema, table, config, adv)
}

/// Trains on sentence labels with a given embedding table.
pub fn train_with_table(
    sentences: &[LabeledSentence],
    schema: &LabelSchema,
    mut table: EmbeddingTable,
    config: &ClfTrainConfig,
    adv: &AdvConfig,
) -> Result<(TextClassifier, ClfReport)> {
    config.validate()?;
    adv.validate()?;
    table.trainable = config.train_embeddings;
    let classes: Vec<String> = schema.all_labels().map(String::from).collect();
    let data: Vec<(Vec<usize>, usize)> = sentences
        .iter()
        .map(|s| {
            let y = classes
                .iter()
                .position(|c| *c == s.sentence_label)
                .ok_or_else(|| Error::Schema(format!("unknown sentence label `{}`", s.sentence_label)))?;
            Ok((s.words().map(|w| table.row_of(w)).collect(), y))
        })
        .collect::<Result<_>>()?;
    let mut present: Vec<usize> = data.iter().map(|(_, y)| *y).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Validation("classifier training needs at least 2 classes".into()));
    }

    let d = table.dim();
    let mut clf = SoftmaxClassifier::zeros(classes, d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = ClfReport::default();
    let lr = config.learning_rate;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (rows, y) = &data[i];
            let mut x = vec![0.0; d];
            if !rows.is_empty() {
                for &r in rows {
                    for (xi, v) in x.iter_mut().zip(table.row(r)) {
                        *xi += v;
                    }
                }
                let n = rows.len() as f64;
                x.iter_mut().for_each(|v| *v /= n);
            }
            let g = clf.adversarial_loss_and_gradients(&x, *y, adv);
            total += g.loss;
            for (w, gw) in clf.weights.iter_mut().zip(&g.weights) {
                *w -= lr * (gw + config.l2 * *w);
            }
            for (b, gb) in clf.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
            if table.trainable && !rows.is_empty() {
                let n = rows.len() as f64;
                for &r in rows {
                    for (e, gx) in table.row_mut(r).iter_mut().zip(&g.input) {
                        *e -= lr * gx / n;
                    }
                }
            }
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || clf.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { epoch, value: mean });
        }
        report.epoch_loss.push(mean);
    }
    Ok((TextClassifier { table, softmax: clf }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse(b"a 1 0\nb 0 1\nc 2 2\n").unwrap()
    }

    #[test]
    fn embedding_means() {
        let t = table();
        assert_eq!(embed_sentence(&["a"], &t), [1.0, 0.0]);
        assert_eq!(embed_sentence(&["a", "b"], &t), [0.5, 0.5]);
        assert_eq!(embed_sentence(&["zz", "yy"], &t), t.row(0));
        assert_eq!(embed_sentence::<&str>(&[], &t), [0.0, 0.0]);
        assert_eq!(embed_sentence(&["A"], &t), [1.0, 0.0]);
    }

    #[test]
    fn embedding_parse_errors() {
        assert!(EmbeddingTable::parse(b"a 1 2\nb 1\n").is_err());
        assert!(EmbeddingTable::parse(b"a 1 x\n").is_err());
        assert!(EmbeddingTable::parse(b"a 1\na 2\n").is_err());
        assert!(EmbeddingTable::parse(b"").is_err());
    }

    #[test]
    fn fgsm_sign_rule() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(fgsm_perturb(&x, &[0.5, -0.1, 3.0], 0.0), x);
        assert_eq!(fgsm_perturb(&x, &[0.5, 0.1, 3.0], 0.1), [1.1, 2.1, 3.1]);
        assert_eq!(fgsm_perturb(&x, &[-1.0, 0.0, 1.0], 0.5), [0.5, 2.0, 3.5]);
    }

    #[test]
    fn softmax_shift_invariant() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        let q = softmax(&[101.0, 102.0, 103.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn toy() -> (Vec<LabeledSentence>, LabelSchema) {
        let schema = LabelSchema::new("O", ["CLA"]).unwrap();
        let rows = [
            ("zinc cures colds", "CLA"),
            ("aspirin cures pain", "CLA"),
            ("honey cures coughs", "CLA"),
            ("we went home", "O"),
            ("they went out", "O"),
            ("I went away", "O"),
        ];
        let s = rows
            .iter()
            .enumerate()
            .map(|(i, (w, l))| {
                let w: Vec<&str> = w.split_whitespace().collect();
                let d = Document::from_tokens(format!("d{i}"), &w, vec![l.to_string(); w.len()]);
                LabeledSentence::from_labels(d.id.clone(), 0, d.tokens, d.token_labels, &schema)
            })
            .collect();
        (s, schema)
    }

    #[test]
    fn separable_toy() {
        let (s, schema) = toy();
        let cfg = ClfTrainConfig { epochs: 50, ..ClfTrainConfig::default() };
        let (m, report) = train_classifier(&s, &schema, &cfg, &AdvConfig::default()).unwrap();
        let pred = m.predict_sentences(&s);
        let gold: Vec<_> = s.iter().map(|x| x.sentence_label.clone()).collect();
        assert_eq!(pred, gold);
        assert!(report.epoch_loss.last() < report.epoch_loss.first());
    }

    #[test]
    fn zero_epsilon_is_clean_training() {
        let (s, schema) = toy();
        let cfg = ClfTrainConfig { epochs: 5, train_embeddings: true, ..ClfTrainConfig::default() };
        let clean = train_classifier(&s, &schema, &cfg, &AdvConfig::default()).unwrap().0;
        let eps0 = train_classifier(&s, &schema, &cfg, &AdvConfig { epsilon: 0.0, adv_weight: 0.5 }).unwrap().0;
        let w0 = train_classifier(&s, &schema, &cfg, &AdvConfig { epsilon: 0.3, adv_weight: 0.0 }).unwrap().0;
        assert_eq!(clean, eps0);
        assert_eq!(clean, w0);
        let adv = train_classifier(&s, &schema, &cfg, &AdvConfig { epsilon: 0.3, adv_weight: 0.5 }).unwrap().0;
        assert_ne!(clean, adv);
    }

    #[test]
    fn needs_two_classes() {
        let (s, schema) = toy();
        let only_cla: Vec<_> = s.into_iter().filter(|x| x.sentence_label == "CLA").collect();
        assert!(train_classifier(&only_cla, &schema, &ClfTrainConfig::default(), &AdvConfig::default()).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let (s, schema) = toy();
        let m = train_classifier(&s, &schema, &ClfTrainConfig::default(), &AdvConfig::default()).unwrap().0;
        let back = TextClassifier::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&["zinc", "cures"]), m.predict(&["zinc", "cures"]));
    }
}
