//! Augmentation operators and the minority-class scheduler.
//!
//! Every operator is label-preserving: the augmented sentence keeps the
//! source's sentence label. Operators take an explicit RNG so that the
//! scheduler can give each (source, attempt) pair its own seeded stream.

mod entity;
mod llm;
mod schedule;

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{layout_tokens, Token};
use crate::error::{Error, Result};
use crate::morph::{AntonymLexicon, Tense, VerbLexicon};
use crate::senttok::LabeledSentence;

pub use entity::{
    default_entity_annotator, EntityAnnotator, EntityDictionary, EntitySpan, LabelRunAnnotator,
    PatternAnnotator,
};
pub use llm::{
    contradiction_prompt, llm_contradict, HttpLlmClient, LlmClient, LlmError, MockLlmClient,
    DEFAULT_TOKEN_ENV,
};
pub use schedule::{
    augment_minority, derive_seed, oversample, undersample, write_manifest, AugmentConfig,
    AugmentResources, AugmentRun, ManifestRecord,
};

/// Punctuation marks inserted by AEDA.
pub const AEDA_MARKS: [&str; 6] = [".", ";", "?", ":", "!", ","];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AugmentMethod {
    #[serde(rename = "AEDA")]
    Aeda,
    #[serde(rename = "VR_Random")]
    VrRandom,
    #[serde(rename = "VR_Antonym")]
    VrAntonym,
    #[serde(rename = "ER")]
    Er,
    #[serde(rename = "LLM")]
    Llm,
    #[serde(rename = "BAT")]
    Bat,
}

impl fmt::Display for AugmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AugmentMethod::Aeda => "aeda",
            AugmentMethod::VrRandom => "vr-random",
            AugmentMethod::VrAntonym => "vr-antonym",
            AugmentMethod::Er => "er",
            AugmentMethod::Llm => "llm",
            AugmentMethod::Bat => "bat",
        };
        f.write_str(s)
    }
}

impl FromStr for AugmentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "aeda" => AugmentMethod::Aeda,
            "vr-random" | "vr" => AugmentMethod::VrRandom,
            "vr-antonym" => AugmentMethod::VrAntonym,
            "er" => AugmentMethod::Er,
            "llm" => AugmentMethod::Llm,
            "bat" => AugmentMethod::Bat,
            _ => return Err(Error::Config(format!("unknown augmentation method `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceId {
    pub doc_id: String,
    pub sent_index: usize,
}

impl SourceId {
    pub fn of(sentence: &LabeledSentence) -> Self {
        SourceId {
            doc_id: sentence.doc_id.clone(),
            sent_index: sentence.sent_index,
        }
    }
}

/// What an operator changed, in enough detail to undo or audit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edit {
    /// Indices (in the augmented sentence) of inserted punctuation tokens.
    Punctuation { positions: Vec<usize> },
    Verb {
        index: usize,
        original: String,
        replacement: String,
        original_base: String,
        replacement_base: String,
        tense: Tense,
    },
    Entity {
        /// Token range replaced in the source sentence.
        start: usize,
        end: usize,
        /// Number of tokens inserted at `start` in the augmented sentence.
        replacement_len: usize,
        category: String,
        original: Vec<String>,
        replacement: Vec<String>,
    },
    Rewrite { prompt_variant: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub sentence: LabeledSentence,
    pub method: AugmentMethod,
    pub source_id: SourceId,
    pub seed: u64,
    pub edit: Edit,
}

/// Result of one operator attempt: a sample, or the reason none was made.
#[derive(Clone, Debug, PartialEq)]
pub enum Attempt {
    Done(Box<AugmentedSample>),
    Skipped(&'static str),
}

impl Attempt {
    pub fn into_option(self) -> Option<AugmentedSample> {
        match self {
            Attempt::Done(s) => Some(*s),
            Attempt::Skipped(_) => None,
        }
    }
}

/// Rebuilds a sentence from `(token, glue_to_previous, label)` pieces.
fn rebuild(source: &LabeledSentence, pieces: Vec<(String, bool, String)>) -> LabeledSentence {
    let layout: Vec<(&str, bool)> = pieces.iter().map(|(t, g, _)| (t.as_str(), *g)).collect();
    let (_, tokens) = layout_tokens(&layout);
    LabeledSentence {
        doc_id: source.doc_id.clone(),
        sent_index: source.sent_index,
        tokens,
        token_labels: pieces.into_iter().map(|(_, _, l)| l).collect(),
        sentence_label: source.sentence_label.clone(),
    }
}

fn glued(tokens: &[Token], i: usize) -> bool {
    i > 0 && tokens[i - 1].is_glued_to(&tokens[i])
}

/// Copies the capitalization pattern of `like` onto `word`.
pub fn match_case(like: &str, word: &str) -> String {
    let mut chars = like.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = like.chars().count() > 1 && like.chars().all(|c| !c.is_lowercase());
    if all_upper {
        word.to_uppercase()
    } else if first_upper {
        let mut w = word.chars();
        match w.next() {
            Some(c) => c.to_uppercase().chain(w).collect(),
            None => String::new(),
        }
    } else {
        word.to_string()
    }
}

/// Inserts `(before_index, mark)` pairs; `before_index` ranges over
/// `0..=n` in source coordinates. Inserted tokens take the sentence label.
pub fn insert_punctuation(
    sentence: &LabeledSentence,
    insertions: &[(usize, &str)],
    seed: u64,
) -> AugmentedSample {
    let mut ins: Vec<(usize, &str)> = insertions.to_vec();
    ins.sort_by_key(|&(i, _)| i);
    let n = sentence.len();
    let mut pieces = Vec::with_capacity(n + ins.len());
    let mut positions = Vec::with_capacity(ins.len());
    let mut next = 0;
    for i in 0..=n {
        let mut inserted_here = false;
        while next < ins.len() && ins[next].0 == i {
            positions.push(pieces.len());
            pieces.push((ins[next].1.to_string(), false, sentence.sentence_label.clone()));
            inserted_here = true;
            next += 1;
        }
        if i < n {
            let glue = !inserted_here && glued(&sentence.tokens, i);
            pieces.push((
                sentence.tokens[i].text.clone(),
                glue,
                sentence.token_labels[i].clone(),
            ));
        }
    }
    AugmentedSample {
        sentence: rebuild(sentence, pieces),
        method: AugmentMethod::Aeda,
        source_id: SourceId::of(sentence),
        seed,
        edit: Edit::Punctuation { positions },
    }
}

/// AEDA: inserts k marks at k distinct positions, k uniform in
/// `[1, max(1, n/3)]`.
pub fn aeda<R: Rng + ?Sized>(sentence: &LabeledSentence, rng: &mut R, seed: u64) -> AugmentedSample {
    let n = sentence.len().max(1);
    let k_max = (n / 3).max(1);
    let k = rng.random_range(1..=k_max);
    let mut slots = index::sample(rng, n, k).into_vec();
    slots.sort_unstable();
    let insertions: Vec<(usize, &str)> = slots
        .into_iter()
        .map(|pos| (pos, *AEDA_MARKS.choose(rng).expect("non-empty")))
        .collect();
    insert_punctuation(sentence, &insertions, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerbMode {
    Random,
    Antonym,
}

/// Token indices holding a replaceable verb.
pub fn eligible_verbs(sentence: &LabeledSentence, lexicon: &VerbLexicon) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| lexicon.detect(&t.text).is_some())
        .map(|(i, _)| i)
        .collect()
}

/// True when `base` conjugated at `tense` is detected back at `tense`.
fn tense_recoverable(lexicon: &VerbLexicon, base: &str, tense: Tense) -> bool {
    lexicon
        .conjugate(base, tense)
        .ok()
        .and_then(|s| lexicon.detect(s))
        .is_some_and(|m| m.tense == tense)
}

/// Replaces the verb at `index` with `replacement_base`, conjugated to the
/// original verb's detected tense.
pub fn replace_verb_at(
    sentence: &LabeledSentence,
    lexicon: &VerbLexicon,
    index: usize,
    replacement_base: &str,
    mode: VerbMode,
    seed: u64,
) -> Result<AugmentedSample> {
    let original = &sentence
        .tokens
        .get(index)
        .ok_or_else(|| Error::Validation(format!("token index {index} out of range")))?
        .text;
    let found = lexicon
        .detect(original)
        .ok_or_else(|| Error::Validation(format!("`{original}` is not a replaceable verb")))?;
    let surface = match_case(original, lexicon.conjugate(replacement_base, found.tense)?);
    let pieces = sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let text = if i == index { surface.clone() } else { t.text.clone() };
            (text, glued(&sentence.tokens, i), sentence.token_labels[i].clone())
        })
        .collect();
    Ok(AugmentedSample {
        sentence: rebuild(sentence, pieces),
        method: match mode {
            VerbMode::Random => AugmentMethod::VrRandom,
            VerbMode::Antonym => AugmentMethod::VrAntonym,
        },
        source_id: SourceId::of(sentence),
        seed,
        edit: Edit::Verb {
            index,
            original: original.clone(),
            replacement: surface,
            original_base: found.base,
            replacement_base: replacement_base.to_string(),
            tense: found.tense,
        },
    })
}

/// Where replacement verbs come from.
#[derive(Clone, Copy, Debug)]
pub enum VerbSource<'a> {
    /// Bases harvested from the training data.
    Pool(&'a [String]),
    Antonyms(&'a AntonymLexicon),
}

/// Distinct replaceable verb bases occurring in `sentences`, sorted.
pub fn verb_pool(sentences: &[LabeledSentence], lexicon: &VerbLexicon) -> Vec<String> {
    let mut pool = std::collections::BTreeSet::new();
    for s in sentences {
        for w in s.words() {
            if let Some(m) = lexicon.detect(w) {
                pool.insert(m.base);
            }
        }
    }
    pool.into_iter().collect()
}

pub(crate) fn try_verb_replace<R: Rng + ?Sized>(
    sentence: &LabeledSentence,
    lexicon: &VerbLexicon,
    source: VerbSource<'_>,
    rng: &mut R,
    seed: u64,
) -> Result<Attempt> {
    let eligible = eligible_verbs(sentence, lexicon);
    let Some(&index) = eligible.choose(rng) else {
        return Ok(Attempt::Skipped("no eligible verb"));
    };
    let found = lexicon
        .detect(&sentence.tokens[index].text)
        .expect("eligible verbs are detectable");
    let usable = |b: &&String| {
        **b != found.base
            && lexicon.contains(b)
            && !lexicon.stoplist().contains(*b)
            && tense_recoverable(lexicon, b, found.tense)
    };
    let (candidates, mode, empty_reason): (Vec<&String>, _, _) = match source {
        VerbSource::Pool(pool) => (pool.iter().filter(usable).collect(), VerbMode::Random, "empty verb pool"),
        VerbSource::Antonyms(ants) => (
            ants.antonyms(&found.base).iter().filter(usable).collect(),
            VerbMode::Antonym,
            "no antonym",
        ),
    };
    let Some(&replacement) = candidates.choose(rng) else {
        return Ok(Attempt::Skipped(empty_reason));
    };
    replace_verb_at(sentence, lexicon, index, replacement, mode, seed)
        .map(|s| Attempt::Done(Box::new(s)))
}

/// Counterfactual verb replacement. Returns `None` when the sentence has no
/// replaceable verb or no replacement candidate exists.
pub fn verb_replace<R: Rng + ?Sized>(
    sentence: &LabeledSentence,
    lexicon: &VerbLexicon,
    source: VerbSource<'_>,
    rng: &mut R,
    seed: u64,
) -> Result<Option<AugmentedSample>> {
    try_verb_replace(sentence, lexicon, source, rng, seed).map(Attempt::into_option)
}

/// Replaces the tokens of `span` with `replacement`. Inserted tokens copy
/// the label of the span's first token.
pub fn replace_entity(
    sentence: &LabeledSentence,
    span: &EntitySpan,
    replacement: &[String],
    seed: u64,
) -> Result<AugmentedSample> {
    if span.start >= span.end || span.end > sentence.len() || replacement.is_empty() {
        return Err(Error::Validation(format!(
            "cannot replace span [{}, {}) of a {}-token sentence with {} tokens",
            span.start,
            span.end,
            sentence.len(),
            replacement.len()
        )));
    }
    let label = sentence.token_labels[span.start].clone();
    let mut pieces = Vec::with_capacity(sentence.len() + replacement.len());
    for i in 0..span.start {
        pieces.push((
            sentence.tokens[i].text.clone(),
            glued(&sentence.tokens, i),
            sentence.token_labels[i].clone(),
        ));
    }
    for (k, tok) in replacement.iter().enumerate() {
        let glue = k == 0 && glued(&sentence.tokens, span.start);
        pieces.push((tok.clone(), glue, label.clone()));
    }
    for i in span.end..sentence.len() {
        pieces.push((
            sentence.tokens[i].text.clone(),
            glued(&sentence.tokens, i),
            sentence.token_labels[i].clone(),
        ));
    }
    Ok(AugmentedSample {
        sentence: rebuild(sentence, pieces),
        method: AugmentMethod::Er,
        source_id: SourceId::of(sentence),
        seed,
        edit: Edit::Entity {
            start: span.start,
            end: span.end,
            replacement_len: replacement.len(),
            category: span.category.clone(),
            original: sentence.tokens[span.start..span.end]
                .iter()
                .map(|t| t.text.clone())
                .collect(),
            replacement: replacement.to_vec(),
        },
    })
}

pub(crate) fn try_entity_replace<R: Rng + ?Sized>(
    sentence: &LabeledSentence,
    annotator: &dyn EntityAnnotator,
    dictionary: &EntityDictionary,
    rng: &mut R,
    seed: u64,
) -> Result<Attempt> {
    let spans = annotator.annotate(sentence);
    for s in &spans {
        if dictionary.entries(&s.category).is_none() {
            return Err(Error::Config(format!(
                "entity dictionary has no category `{}`",
                s.category
            )));
        }
    }
    let Some(span) = spans.choose(rng) else {
        return Ok(Attempt::Skipped("no entity"));
    };
    let original: Vec<&str> = sentence.tokens[span.start..span.end]
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    let candidates: Vec<&Vec<String>> = dictionary
        .entries(&span.category)
        .unwrap_or(&[])
        .iter()
        .filter(|e| e.iter().map(String::as_str).ne(original.iter().copied()))
        .collect();
    let Some(&replacement) = candidates.choose(rng) else {
        return Ok(Attempt::Skipped("no alternative entity"));
    };
    replace_entity(sentence, span, replacement, seed).map(|s| Attempt::Done(Box::new(s)))
}

/// Entity replacement. Returns `None` when the sentence has no entity or the
/// only dictionary candidate is the original.
pub fn entity_replace<R: Rng + ?Sized>(
    sentence: &LabeledSentence,
    annotator: &dyn EntityAnnotator,
    dictionary: &EntityDictionary,
    rng: &mut R,
    seed: u64,
) -> Result<Option<AugmentedSample>> {
    try_entity_replace(sentence, annotator, dictionary, rng, seed).map(Attempt::into_option)
}

/// Wraps an LLM rewrite as a sample; every token gets the sentence label.
pub fn rewrite_sample(
    source: &LabeledSentence,
    text: &str,
    prompt_variant: u8,
    seed: u64,
) -> Result<AugmentedSample> {
    let tokens = crate::corpus::tokenize_text(text);
    if tokens.is_empty() {
        return Err(Error::AugmentationFailed("completion has no tokens".into()));
    }
    let token_labels = vec![source.sentence_label.clone(); tokens.len()];
    Ok(AugmentedSample {
        sentence: LabeledSentence {
            doc_id: source.doc_id.clone(),
            sent_index: source.sent_index,
            tokens,
            token_labels,
            sentence_label: source.sentence_label.clone(),
        },
        method: AugmentMethod::Llm,
        source_id: SourceId::of(source),
        seed,
        edit: Edit::Rewrite { prompt_variant },
    })
}
