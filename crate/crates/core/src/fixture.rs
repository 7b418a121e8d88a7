//! Synthetic imbalanced corpus for offline experiments.
//!
//! Documents are sequences of sentences drawn from class-conditional
//! templates with their own verb, entity and phrasing distributions, so the
//! classes are separable in principle but share vocabulary. A fraction of
//! the non-outside sentences gets a short outside-labeled opener, making
//! them non-uniform while keeping their majority label. The generator keeps
//! its own counts, which must agree with statistics recomputed from the
//! output.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, LabelSchema};
use crate::error::{Error, Result};
use crate::morph::{Tense, VerbLexicon};

pub const OUTSIDE: &str = "O";
pub const CLASSES: [&str; 5] = ["O", "CLA", "EXP", "PER", "QUE"];

const DRUG: &[&str] = &[
    "rifaximin", "Xifaxan", "probiotics", "peppermint oil", "Linzess", "Amitiza", "metronidazole",
    "neomycin", "Imodium", "Bentyl", "Zoloft", "turmeric", "Vitamin D", "magnesium",
    "activated charcoal", "Align", "Culturelle", "Iberogast", "Atrantil", "ginger tea",
];
const COND: &[&str] = &[
    "IBS", "Sibo", "bloating", "constipation", "diarrhea", "cramps", "reflux", "nausea", "gas",
    "abdominal pain", "fatigue", "anxiety", "brain fog", "leaky gut", "heartburn",
];
const FOOD: &[&str] = &["gluten", "dairy", "garlic", "onions", "coffee", "sugar", "beans", "wheat", "alcohol"];
const DUR: &[&str] = &["days", "weeks", "months"];
const PERSON: &[&str] = &["woman", "man", "guy", "girl", "mom", "student", "nurse", "teacher"];
const REL: &[&str] = &["mother", "sister", "brother", "father", "husband", "wife", "son", "daughter"];
const ADJ: &[&str] = &["better", "worse", "great", "awful", "fine", "sick", "tired", "normal"];
const MONTH: &[&str] = &["January", "March", "May", "June", "August", "October", "December"];
const PLACE: &[&str] = &["Texas", "Ohio", "London", "Toronto", "Sydney", "Berlin"];
const JOB: &[&str] = &["nurse", "teacher", "driver", "cashier", "engineer", "chef"];
const OPENER: &[[&str; 2]] = &[["Honestly", ","], ["Well", ","], ["So", ","], ["Also", ","], ["Anyway", ","], ["Update", ":"]];

const V_CAUSAL: &[&str] = &[
    "cause", "trigger", "cure", "worsen", "relieve", "reduce", "eliminate", "heal", "prevent",
    "aggravate", "improve", "induce", "fix", "ease",
];
const V_TAKE: &[&str] = &["take", "try", "start", "use", "stop", "quit", "finish", "begin"];
const V_FEEL: &[&str] = &["feel", "notice", "become"];
const V_PRESCRIBE: &[&str] = &["prescribe", "recommend", "suggest", "mention"];
const V_HAVE: &[&str] = &["have", "develop", "get"];
const V_HELP: &[&str] = &["help", "work"];
const V_ASK: &[&str] = &["ask", "tell", "call", "see"];
const V_WORK: &[&str] = &["work", "live"];
const V_UPDATE: &[&str] = &["update", "inform", "remind"];
const V_READ: &[&str] = &["read", "hear", "find"];

/// `{NAME}` fills from a word pool, `{V:GROUP:tense}` conjugates a verb.
const TEMPLATES: &[(&str, &[&str])] = &[
    ("CLA", &[
        "{DRUG} {V:CAUSAL:past} my {COND} .",
        "{DRUG} {V:CAUSAL:3sg} {COND} in most people .",
        "{PCT} of people diagnosed with {COND} {V:HAVE:base} {COND} .",
        "I am convinced that {DRUG} {V:CAUSAL:past} my {COND} .",
        "{COND} is {V:CAUSAL:pp} by {FOOD} in many cases .",
        "Eating {FOOD} {V:CAUSAL:3sg} {COND} for me .",
        "{DRUG} will {V:CAUSAL:base} your {COND} within {NUM} {DUR} .",
    ]),
    ("EXP", &[
        "I {V:TAKE:past} {DRUG} for {NUM} {DUR} .",
        "After {NUM} {DUR} on {DRUG} I {V:FEEL:past} {ADJ} .",
        "I have been {V:TAKE:ger} {DRUG} since {MONTH} .",
        "My doctor {V:PRESCRIBE:past} {DRUG} last {MONTH} .",
        "The first {DUR} on {DRUG} I {V:FEEL:past} {ADJ} .",
        "I {V:TAKE:past} {DRUG} twice a day with food .",
    ]),
    ("PER", &[
        "I am a {NUM} year old {PERSON} with {COND} .",
        "My {REL} {V:HAVE:3sg} {COND} too .",
        "I was diagnosed with {COND} in {YEAR} .",
        "I have {V:HAVE:pp} {COND} for {NUM} years .",
        "I {V:WORK:base} in {PLACE} as a {JOB} .",
        "My {REL} and I both {V:HAVE:base} {COND} .",
    ]),
    ("QUE", &[
        "Has anyone {V:TAKE:pp} {DRUG} for {COND} ?",
        "Does {DRUG} {V:HELP:base} with {COND} ?",
        "What should I {V:TAKE:base} for {COND} ?",
        "Should I {V:ASK:base} my doctor about {DRUG} ?",
        "Can {FOOD} {V:CAUSAL:base} {COND} ?",
        "How many {DUR} did it {V:HELP:base} for you ?",
    ]),
    ("O", &[
        "Thanks for reading .",
        "Hope this helps someone .",
        "Good luck everyone .",
        "Sorry for the long post .",
        "Any advice would be great .",
        "I will {V:UPDATE:base} you all soon .",
        "This forum is great .",
        "Stay strong everyone .",
        "I {V:READ:past} about {DRUG} on this forum .",
        "{COND} is the worst .",
        "Thank you all for the kind replies .",
        "I {V:READ:past} a post about {FOOD} yesterday .",
    ]),
];

fn pool(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "DRUG" => DRUG,
        "COND" => COND,
        "FOOD" => FOOD,
        "DUR" => DUR,
        "PERSON" => PERSON,
        "REL" => REL,
        "ADJ" => ADJ,
        "MONTH" => MONTH,
        "PLACE" => PLACE,
        "JOB" => JOB,
        _ => return None,
    })
}

fn verb_group(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "CAUSAL" => V_CAUSAL,
        "TAKE" => V_TAKE,
        "FEEL" => V_FEEL,
        "PRESCRIBE" => V_PRESCRIBE,
        "HAVE" => V_HAVE,
        "HELP" => V_HELP,
        "ASK" => V_ASK,
        "WORK" => V_WORK,
        "UPDATE" => V_UPDATE,
        "READ" => V_READ,
        _ => return None,
    })
}

fn tense_of(name: &str) -> Option<Tense> {
    Some(match name {
        "base" => Tense::Base,
        "3sg" => Tense::Present3sg,
        "past" => Tense::Past,
        "pp" => Tense::PastParticiple,
        "ger" => Tense::Gerund,
        _ => return None,
    })
}

fn fill<R: Rng + ?Sized>(template: &str, lexicon: &VerbLexicon, rng: &mut R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for piece in template.split(' ') {
        let Some(slot) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) else {
            out.push(piece.to_string());
            continue;
        };
        let bad = || Error::Config(format!("bad template slot `{piece}`"));
        match slot {
            "NUM" => out.push(rng.random_range(2..=60).to_string()),
            "YEAR" => out.push(rng.random_range(1995..=2022).to_string()),
            "PCT" => {
                out.push((rng.random_range(1..=19) * 5).to_string());
                out.push("%".into());
            }
            _ if slot.starts_with("V:") => {
                let mut parts = slot.split(':').skip(1);
                let group = parts.next().and_then(verb_group).ok_or_else(bad)?;
                let tense = parts.next().and_then(tense_of).ok_or_else(bad)?;
                let base = group.choose(rng).expect("non-empty group");
                out.push(lexicon.conjugate(base, tense)?.to_string());
            }
            _ => {
                let words = pool(slot).ok_or_else(bad)?;
                out.extend(words.choose(rng).expect("non-empty pool").split(' ').map(String::from));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    /// Sentences per class in the training split.
    pub train_sizes: BTreeMap<String, usize>,
    pub dev_sizes: BTreeMap<String, usize>,
    pub minority: String,
    /// Share of non-outside sentences given an outside-labeled opener.
    pub partial_fraction: f64,
    pub max_doc_sentences: usize,
}

impl Default for FixtureSpec {
    /// Class proportions of a heavily skewed forum corpus, scaled to a few
    /// thousand sentences; the minority is about 1% of the training split.
    fn default() -> Self {
        let sizes = |v: [usize; 5]| CLASSES.iter().map(|c| c.to_string()).zip(v).collect();
        FixtureSpec {
            train_sizes: sizes([1983, 40, 192, 782, 506]),
            dev_sizes: sizes([1333, 24, 117, 497, 316]),
            minority: "CLA".into(),
            partial_fraction: 0.2,
            max_doc_sentences: 7,
        }
    }
}

impl FixtureSpec {
    pub fn schema() -> LabelSchema {
        LabelSchema::new(OUTSIDE, CLASSES[1..].iter().copied()).expect("static schema")
    }

    pub fn validate(&self) -> Result<()> {
        for sizes in [&self.train_sizes, &self.dev_sizes] {
            if let Some(c) = sizes.keys().find(|c| !CLASSES.contains(&c.as_str())) {
                return Err(Error::Config(format!("fixture has no templates for class `{c}`")));
            }
        }
        if !self.train_sizes.contains_key(&self.minority) || self.minority == OUTSIDE {
            return Err(Error::Config(format!("minority class `{}` is not a sized category", self.minority)));
        }
        let min = self.train_sizes[&self.minority];
        if self.train_sizes.iter().any(|(c, &n)| *c != self.minority && n <= min) {
            return Err(Error::Config("the minority class must be the smallest".into()));
        }
        if !(0.0..=1.0).contains(&self.partial_fraction) || self.max_doc_sentences == 0 {
            return Err(Error::Config("invalid fixture shape parameters".into()));
        }
        Ok(())
    }
}

/// What the generator produced, counted while generating.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bookkeeping {
    pub n_documents: usize,
    pub n_sentences: usize,
    /// Sentences per majority label.
    pub sentences_per_class: BTreeMap<String, usize>,
    /// Sentences whose tokens all carry one label.
    pub n_uniform: usize,
    pub tokens_per_label: BTreeMap<String, usize>,
    pub max_doc_tokens: usize,
    pub n_unique_words: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureSplit {
    pub dataset: Dataset,
    pub bookkeeping: Bookkeeping,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub train: FixtureSplit,
    pub dev: FixtureSplit,
}

fn generate_split(
    sizes: &BTreeMap<String, usize>,
    spec: &FixtureSpec,
    lexicon: &VerbLexicon,
    rng: &mut ChaCha8Rng,
    id_prefix: &str,
) -> Result<FixtureSplit> {
    let mut slots: Vec<&str> = Vec::new();
    for (class, &n) in sizes {
        slots.extend(std::iter::repeat_n(class.as_str(), n));
    }
    slots.shuffle(rng);

    let templates: BTreeMap<&str, &[&str]> = TEMPLATES.iter().copied().collect();
    let mut book = Bookkeeping::default();
    let mut words = BTreeSet::new();
    let mut documents = Vec::new();
    let mut rest = slots.as_slice();
    while !rest.is_empty() {
        let k = rng.random_range(1..=spec.max_doc_sentences).min(rest.len());
        let (doc_slots, tail) = rest.split_at(k);
        rest = tail;
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        for &class in doc_slots {
            let template = templates[class].choose(rng).expect("templates per class");
            let body = fill(template, lexicon, rng)?;
            let partial = class != OUTSIDE && rng.random_bool(spec.partial_fraction);
            if partial {
                let opener = OPENER.choose(rng).expect("openers");
                debug_assert!(body.len() > opener.len());
                tokens.extend(opener.iter().map(|w| w.to_string()));
                labels.extend(std::iter::repeat_n(OUTSIDE.to_string(), opener.len()));
                *book.tokens_per_label.entry(OUTSIDE.into()).or_default() += opener.len();
            } else {
                book.n_uniform += 1;
            }
            *book.tokens_per_label.entry(class.into()).or_default() += body.len();
            labels.extend(std::iter::repeat_n(class.to_string(), body.len()));
            tokens.extend(body);
            *book.sentences_per_class.entry(class.into()).or_default() += 1;
            book.n_sentences += 1;
        }
        book.max_doc_tokens = book.max_doc_tokens.max(tokens.len());
        words.extend(tokens.iter().cloned());
        documents.push(Document::from_tokens(format!("{id_prefix}{}", documents.len()), &tokens, labels));
    }
    book.n_documents = documents.len();
    book.n_unique_words = words.len();
    Ok(FixtureSplit {
        dataset: Dataset::new(FixtureSpec::schema(), documents)?,
        bookkeeping: book,
    })
}

/// Seed of the canonical fixture used by the experiments and benchmarks.
pub const BUNDLED_SEED: u64 = 0;

/// The canonical fixture: default sizes, [`BUNDLED_SEED`].
pub fn bundled() -> Result<Fixture> {
    generate(&FixtureSpec::default(), BUNDLED_SEED)
}

/// Generates train and dev splits from independent streams of one seed.
pub fn generate(spec: &FixtureSpec, seed: u64) -> Result<Fixture> {
    spec.validate()?;
    let lexicon = VerbLexicon::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = generate_split(&spec.train_sizes, spec, &lexicon, &mut rng, "train")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let dev = generate_split(&spec.dev_sizes, spec, &lexicon, &mut rng, "dev")?;
    let mut train = train;
    train.dataset.schema = train.dataset.schema.clone().with_frequencies_from(&train.dataset);
    Ok(Fixture { train, dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset_stats;
    use crate::senttok::{purity_stats, SentenceSplitter};

    fn small() -> FixtureSpec {
        let sizes = |v: [usize; 5]| CLASSES.iter().map(|c| c.to_string()).zip(v).collect();
        FixtureSpec {
            train_sizes: sizes([200, 5, 20, 80, 50]),
            dev_sizes: sizes([100, 3, 10, 40, 25]),
            ..FixtureSpec::default()
        }
    }

    #[test]
    fn every_template_fills() {
        let lex = VerbLexicon::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (_, ts) in TEMPLATES {
            for t in *ts {
                for _ in 0..20 {
                    let toks = fill(t, &lex, &mut rng).unwrap();
                    assert!(matches!(toks.last().map(String::as_str), Some(".") | Some("?")));
                }
            }
        }
    }

    #[test]
    fn bookkeeping_matches_recomputed_stats() {
        let fx = generate(&small(), 3).unwrap();
        for split in [&fx.train, &fx.dev] {
            let b = &split.bookkeeping;
            let stats = dataset_stats(&split.dataset);
            assert_eq!(stats.n_texts, b.n_documents);
            assert_eq!(stats.n_unique_words, b.n_unique_words);
            assert_eq!(stats.max_length, b.max_doc_tokens);
            assert_eq!(stats.label_dist, b.tokens_per_label);
            let sents = SentenceSplitter::default().split_all(&split.dataset.documents, &split.dataset.schema);
            let purity = purity_stats(&sents);
            assert_eq!(purity.n_sentences, b.n_sentences);
            assert_eq!(purity.n_uniform, b.n_uniform);
            assert_eq!(purity.per_class, b.sentences_per_class);
        }
    }

    #[test]
    fn default_sizes_and_reproducibility() {
        let spec = FixtureSpec::default();
        assert_eq!(spec.train_sizes["CLA"], 40);
        let a = generate(&small(), 11).unwrap();
        let b = generate(&small(), 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train.dataset, generate(&small(), 12).unwrap().train.dataset);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small();
        s.minority = "O".into();
        assert!(generate(&s, 0).is_err());
        let mut s = small();
        s.train_sizes.insert("XYZ".into(), 4);
        assert!(generate(&s, 0).is_err());
        let mut s = small();
        s.train_sizes.insert("CLA".into(), 500);
        assert!(generate(&s, 0).is_err());
    }
}
