//! Sentence splitting, majority-label assignment for training, and
//! projection of sentence labels back onto tokens for inference.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{render_tokens, Document, LabelSchema, Token};

const BUNDLED_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub doc_id: String,
    pub sent_index: usize,
    pub tokens: Vec<Token>,
    pub token_labels: Vec<String>,
    pub sentence_label: String,
}

impl LabeledSentence {
    /// Builds a sentence whose label is the majority of `token_labels`.
    pub fn from_labels(
        doc_id: impl Into<String>,
        sent_index: usize,
        tokens: Vec<Token>,
        token_labels: Vec<String>,
        schema: &LabelSchema,
    ) -> Self {
        let sentence_label = majority_label(&token_labels, schema);
        LabeledSentence {
            doc_id: doc_id.into(),
            sent_index,
            tokens,
            token_labels,
            sentence_label,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Surface text honoring source adjacency between tokens.
    pub fn text(&self) -> String {
        render_tokens(&self.tokens)
    }

    /// Tokens joined by single spaces.
    pub fn tokenized_text(&self) -> String {
        self.words().collect::<Vec<_>>().join(" ")
    }

    /// Packs the sentence as a standalone document.
    pub fn to_document(&self, id: impl Into<String>) -> Document {
        let words: Vec<&str> = self.words().collect();
        Document::from_tokens(id, &words, self.token_labels.clone())
    }
}

/// Rule-based splitter: a boundary follows sentence-final punctuation unless
/// the period belongs to a listed abbreviation, and always at document end.
#[derive(Clone, Debug)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_list(BUNDLED_ABBREVIATIONS)
    }
}

fn is_terminal_char(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(tok: &str) -> bool {
    matches!(tok, ")" | "]" | "}" | "\"" | "'" | "”" | "’" | "»")
}

impl SentenceSplitter {
    /// Parses an abbreviation list: one entry per line, `#` comments.
    pub fn from_list(text: &str) -> Self {
        let abbreviations = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.trim_end_matches('.').to_string())
            .collect();
        SentenceSplitter { abbreviations }
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(word)
    }

    fn ends_sentence(&self, tokens: &[Token], i: usize) -> bool {
        let text = tokens[i].text.as_str();
        if text.chars().all(is_terminal_char) {
            // A bare period right after an abbreviation is part of it.
            if text == "." && i > 0 && self.is_abbreviation(&tokens[i - 1].text) {
                return false;
            }
            return true;
        }
        match text.char_indices().last() {
            Some((pos, c)) if is_terminal_char(c) => {
                let stem = text[..pos].trim_end_matches(is_terminal_char);
                !(c == '.' && self.is_abbreviation(stem))
            }
            _ => false,
        }
    }

    /// Token index ranges of the sentences in `tokens`. The ranges tile
    /// `0..tokens.len()` exactly.
    pub fn boundaries(&self, tokens: &[Token]) -> Vec<std::ops::Range<usize>> {
        let mut ranges = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < tokens.len() {
            if self.ends_sentence(tokens, i) {
                let mut end = i + 1;
                while end < tokens.len()
                    && (is_closing(&tokens[end].text)
                        || tokens[end].text.chars().all(is_terminal_char))
                {
                    end += 1;
                }
                ranges.push(start..end);
                start = end;
                i = end;
            } else {
                i += 1;
            }
        }
        if start < tokens.len() {
            ranges.push(start..tokens.len());
        }
        ranges
    }

    pub fn split(&self, document: &Document, schema: &LabelSchema) -> Vec<LabeledSentence> {
        self.boundaries(&document.tokens)
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                LabeledSentence::from_labels(
                    document.id.clone(),
                    k,
                    document.tokens[r.clone()].to_vec(),
                    document.token_labels[r].to_vec(),
                    schema,
                )
            })
            .collect()
    }

    pub fn split_all(&self, documents: &[Document], schema: &LabelSchema) -> Vec<LabeledSentence> {
        documents.iter().flat_map(|d| self.split(d, schema)).collect()
    }
}

/// Splits with the bundled abbreviation list.
pub fn split_sentences(document: &Document, schema: &LabelSchema) -> Vec<LabeledSentence> {
    SentenceSplitter::default().split(document, schema)
}

/// Most frequent label. Ties go to the label with the smallest training
/// frequency, then to the earlier label in schema order.
pub fn majority_label<S: AsRef<str>>(token_labels: &[S], schema: &LabelSchema) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in token_labels {
        *counts.entry(l.as_ref()).or_default() += 1;
    }
    counts
        .into_iter()
        .min_by_key(|&(label, count)| {
            (
                std::cmp::Reverse(count),
                schema.train_freq(label),
                schema.label_index(label).unwrap_or(usize::MAX),
                label,
            )
        })
        .map(|(label, _)| label.to_string())
        .unwrap_or_else(|| schema.outside_label().to_string())
}

pub fn project_labels(sentence_label: &str, n_tokens: usize) -> Vec<String> {
    vec![sentence_label.to_string(); n_tokens]
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurityStats {
    pub n_sentences: usize,
    /// Sentences whose tokens all share one label.
    pub n_uniform: usize,
    /// Sentence count per majority label.
    pub per_class: BTreeMap<String, usize>,
}

impl PurityStats {
    pub fn uniform_fraction(&self) -> f64 {
        if self.n_sentences == 0 {
            0.0
        } else {
            self.n_uniform as f64 / self.n_sentences as f64
        }
    }
}

pub fn purity_stats(sentences: &[LabeledSentence]) -> PurityStats {
    let mut stats = PurityStats::default();
    for s in sentences {
        stats.n_sentences += 1;
        if s.token_labels.windows(2).all(|w| w[0] == w[1]) {
            stats.n_uniform += 1;
        }
        *stats.per_class.entry(s.sentence_label.clone()).or_default() += 1;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        let mut s = LabelSchema::new("O", ["CLA", "EXP", "PER", "QUE"]).unwrap();
        s.set_train_freq("CLA", 8183).unwrap();
        s.set_train_freq("O", 316676).unwrap();
        s
    }

    fn doc(words: &str) -> Document {
        let w: Vec<&str> = words.split_whitespace().collect();
        Document::from_tokens("d", &w, vec!["O".into(); w.len()])
    }

    fn sizes(d: &Document) -> Vec<usize> {
        split_sentences(d, &schema()).iter().map(|s| s.len()).collect()
    }

    #[test]
    fn two_terminal_periods() {
        assert_eq!(sizes(&doc("I ran . It helped .")), [3, 3]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(sizes(&doc("Dr . Smith agreed .")), [5]);
        assert_eq!(sizes(&doc("Dr. Smith agreed.")), [3]);
    }

    #[test]
    fn no_terminal_punctuation() {
        assert_eq!(sizes(&doc("no punctuation here")), [3]);
    }

    #[test]
    fn question_and_closing_quote() {
        assert_eq!(sizes(&doc("Does it work ? \" Yes !")), [5, 2]);
        assert_eq!(sizes(&doc("Really ?! ok")), [2, 1]);
    }

    #[test]
    fn majority_examples() {
        let s = schema();
        assert_eq!(majority_label(&["CLA", "CLA", "O"], &s), "CLA");
        assert_eq!(majority_label(&["O", "O", "O", "O"], &s), "O");
        assert_eq!(majority_label(&["CLA", "O"], &s), "CLA");
        assert_eq!(majority_label(&["O", "CLA"], &s), "CLA");
        // equal frequency (both 0): schema order decides
        assert_eq!(majority_label(&["QUE", "EXP"], &s), "EXP");
    }

    #[test]
    fn projection_round_trip() {
        let s = schema();
        assert_eq!(project_labels("QUE", 3), ["QUE", "QUE", "QUE"]);
        for label in s.all_labels() {
            for n in 1..5 {
                assert_eq!(majority_label(&project_labels(label, n), &s), label);
            }
        }
    }

    #[test]
    fn purity_counts() {
        let s = schema();
        let mk = |labels: &[&str]| {
            let w: Vec<&str> = labels.iter().map(|_| "w").collect();
            let d = Document::from_tokens("d", &w, labels.iter().map(|l| l.to_string()).collect());
            LabeledSentence::from_labels("d", 0, d.tokens, d.token_labels, &s)
        };
        let mut sents: Vec<_> = (0..7).map(|_| mk(&["O", "O"])).collect();
        sents.push(mk(&["CLA", "CLA", "O"]));
        let p = purity_stats(&sents);
        assert_eq!(p.n_sentences, 8);
        assert_eq!(p.n_uniform, 7);
        assert!((p.uniform_fraction() - 0.875).abs() < 1e-12);
        assert_eq!(p.per_class["CLA"], 1);
        assert_eq!(purity_stats(&[]), PurityStats::default());
    }
}
