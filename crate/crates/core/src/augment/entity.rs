use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::senttok::LabeledSentence;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub category: String,
}

/// Finds entity spans in a sentence. Returned spans must be
/// non-overlapping and in range.
pub trait EntityAnnotator: Send + Sync {
    fn annotate(&self, sentence: &LabeledSentence) -> Vec<EntitySpan>;
}

impl<F> EntityAnnotator for F
where
    F: Fn(&LabeledSentence) -> Vec<EntitySpan> + Send + Sync,
{
    fn annotate(&self, sentence: &LabeledSentence) -> Vec<EntitySpan> {
        self(sentence)
    }
}

/// Pattern rules: PERCENT is a number followed by `%` or `percent`,
/// CARDINAL a standalone number, PROPER a maximal run of capitalized
/// tokens that does not start the sentence.
#[derive(Clone, Copy, Debug, Default)]
pub struct PatternAnnotator;

fn is_number(tok: &str) -> bool {
    let mut seen_digit = false;
    let mut prev_sep = true;
    for c in tok.chars() {
        if c.is_ascii_digit() {
            seen_digit = true;
            prev_sep = false;
        } else if (c == '.' || c == ',') && !prev_sep {
            prev_sep = true;
        } else {
            return false;
        }
    }
    seen_digit && !prev_sep
}

fn is_capitalized(tok: &str) -> bool {
    tok != "I" && tok.chars().next().is_some_and(char::is_uppercase)
}

impl EntityAnnotator for PatternAnnotator {
    fn annotate(&self, sentence: &LabeledSentence) -> Vec<EntitySpan> {
        let words: Vec<&str> = sentence.words().collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < words.len() {
            if is_number(words[i]) {
                let percent = words
                    .get(i + 1)
                    .is_some_and(|w| *w == "%" || w.eq_ignore_ascii_case("percent"));
                let (end, category) = if percent { (i + 2, "PERCENT") } else { (i + 1, "CARDINAL") };
                spans.push(EntitySpan { start: i, end, category: category.into() });
                i = end;
            } else if i > 0 && is_capitalized(words[i]) {
                let mut end = i + 1;
                while end < words.len() && is_capitalized(words[end]) {
                    end += 1;
                }
                spans.push(EntitySpan { start: i, end, category: "PROPER".into() });
                i = end;
            } else {
                i += 1;
            }
        }
        spans
    }
}

pub fn default_entity_annotator(sentence: &LabeledSentence) -> Vec<EntitySpan> {
    PatternAnnotator.annotate(sentence)
}

/// Uses gold token labels as entities: maximal runs of one non-outside label.
#[derive(Clone, Debug)]
pub struct LabelRunAnnotator {
    pub outside_label: String,
}

impl EntityAnnotator for LabelRunAnnotator {
    fn annotate(&self, sentence: &LabeledSentence) -> Vec<EntitySpan> {
        let labels = &sentence.token_labels;
        let mut spans = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            let mut j = i + 1;
            while j < labels.len() && labels[j] == labels[i] {
                j += 1;
            }
            if labels[i] != self.outside_label {
                spans.push(EntitySpan { start: i, end: j, category: labels[i].clone() });
            }
            i = j;
        }
        spans
    }
}

/// Entity surface forms per category, deduplicated, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDictionary {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl EntityDictionary {
    pub fn build(sentences: &[LabeledSentence], annotator: &dyn EntityAnnotator) -> Self {
        let mut dict = EntityDictionary::default();
        for s in sentences {
            for span in annotator.annotate(s) {
                let toks = s.tokens[span.start..span.end]
                    .iter()
                    .map(|t| t.text.clone())
                    .collect();
                dict.insert(&span.category, toks);
            }
        }
        dict
    }

    pub fn insert(&mut self, category: &str, entity: Vec<String>) {
        if entity.is_empty() {
            return;
        }
        let list = self.entries.entry(category.to_string()).or_default();
        if !list.contains(&entity) {
            list.push(entity);
        }
    }

    pub fn entries(&self, category: &str) -> Option<&[Vec<String>]> {
        self.entries.get(category).map(Vec::as_slice)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `category<TAB>token token ...` per entity.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (cat, list) in &self.entries {
            for e in list {
                let _ = writeln!(out, "{cat}\t{}", e.join(" "));
            }
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "invalid UTF-8"))?;
        let mut dict = EntityDictionary::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (cat, ent) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(idx + 1, "expected `category<TAB>entity`"))?;
            let toks: Vec<String> = ent.split_whitespace().map(String::from).collect();
            if toks.is_empty() {
                return Err(Error::parse(idx + 1, "empty entity"));
            }
            dict.insert(cat.trim(), toks);
        }
        Ok(dict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelSchema};

    fn sent(words: &str) -> LabeledSentence {
        let schema = LabelSchema::new("O", ["CLA"]).unwrap();
        let w: Vec<&str> = words.split_whitespace().collect();
        let d = Document::from_tokens("d", &w, vec!["O".into(); w.len()]);
        LabeledSentence::from_labels("d", 0, d.tokens, d.token_labels, &schema)
    }

    #[test]
    fn percent_span() {
        let spans = default_entity_annotator(&sent("80 % of people"));
        assert_eq!(spans, [EntitySpan { start: 0, end: 2, category: "PERCENT".into() }]);
    }

    #[test]
    fn proper_span() {
        let spans = default_entity_annotator(&sent("I have IBS"));
        assert_eq!(spans, [EntitySpan { start: 2, end: 3, category: "PROPER".into() }]);
    }

    #[test]
    fn nothing_in_plain_sentence() {
        assert!(default_entity_annotator(&sent("it helps a lot")).is_empty());
    }

    #[test]
    fn cardinals_and_runs() {
        let spans = default_entity_annotator(&sent("took 3.5 mg of Vitamin D daily"));
        assert_eq!(spans[0], EntitySpan { start: 1, end: 2, category: "CARDINAL".into() });
        assert_eq!(spans[1], EntitySpan { start: 4, end: 6, category: "PROPER".into() });
        assert!(!is_number("3."));
        assert!(is_number("1,000"));
    }

    #[test]
    fn dictionary_dedup_and_tsv() {
        let s = vec![sent("we saw IBS and IBS in 80 % cases"), sent("then Crohn Disease")];
        let d = EntityDictionary::build(&s, &PatternAnnotator);
        assert_eq!(d.entries("PROPER").unwrap().len(), 2);
        assert_eq!(d.entries("PERCENT").unwrap(), [vec!["80".to_string(), "%".to_string()]]);
        assert_eq!(EntityDictionary::parse(d.to_tsv().as_bytes()).unwrap(), d);
    }

    #[test]
    fn gold_runs() {
        let schema = LabelSchema::new("O", ["POP", "INT"]).unwrap();
        let w = ["adults", "with", "IBS", "took", "rifaximin"];
        let labels = ["POP", "POP", "POP", "O", "INT"].map(String::from).to_vec();
        let d = Document::from_tokens("d", &w, labels);
        let s = LabeledSentence::from_labels("d", 0, d.tokens, d.token_labels, &schema);
        let ann = LabelRunAnnotator { outside_label: "O".into() };
        let spans = ann.annotate(&s);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1], EntitySpan { start: 4, end: 5, category: "INT".into() });
    }
}
