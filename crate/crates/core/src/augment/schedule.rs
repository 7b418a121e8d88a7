//! Minority-class augmentation scheduling and random re-balancing.
//!
//! Each (source sentence, attempt) pair draws from its own RNG stream seeded
//! by a stable hash, so outputs do not depend on the number of worker
//! threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    aeda, llm_contradict, rewrite_sample, try_entity_replace, try_verb_replace, Attempt,
    AugmentMethod, AugmentedSample, Edit, EntityAnnotator, EntityDictionary, LlmClient, SourceId,
    VerbSource,
};
use crate::error::{Error, Result};
use crate::morph::{AntonymLexicon, VerbLexicon};
use crate::senttok::LabeledSentence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub target_class: String,
    pub n_samples: usize,
    pub per_sentence: usize,
    pub method: AugmentMethod,
    pub master_seed: u64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.per_sentence == 0 {
            return Err(Error::Config("per_sentence must be at least 1".into()));
        }
        Ok(())
    }
}

/// Lexicons, dictionaries and clients the operators draw on. Only the ones
/// the configured method needs must be present.
#[derive(Clone, Copy)]
pub struct AugmentResources<'a> {
    pub lexicon: Option<&'a VerbLexicon>,
    /// Replacement bases for random verb replacement.
    pub verb_pool: &'a [String],
    pub antonyms: Option<&'a AntonymLexicon>,
    pub annotator: Option<&'a dyn EntityAnnotator>,
    pub dictionary: Option<&'a EntityDictionary>,
    pub llm: Option<&'a dyn LlmClient>,
    pub llm_attempts: usize,
}

impl Default for AugmentResources<'_> {
    fn default() -> Self {
        AugmentResources {
            lexicon: None,
            verb_pool: &[],
            antonyms: None,
            annotator: None,
            dictionary: None,
            llm: None,
            llm_attempts: 3,
        }
    }
}

impl AugmentResources<'_> {
    fn check(&self, method: AugmentMethod) -> Result<()> {
        let missing = |what: &str| Err(Error::Config(format!("{method} needs {what}")));
        match method {
            AugmentMethod::Aeda => Ok(()),
            AugmentMethod::VrRandom if self.lexicon.is_none() => missing("a verb lexicon"),
            AugmentMethod::VrRandom if self.verb_pool.is_empty() => missing("a training verb pool"),
            AugmentMethod::VrAntonym if self.lexicon.is_none() => missing("a verb lexicon"),
            AugmentMethod::VrAntonym if self.antonyms.is_none() => missing("an antonym lexicon"),
            AugmentMethod::Er if self.annotator.is_none() => missing("an entity annotator"),
            AugmentMethod::Er if self.dictionary.is_none() => missing("an entity dictionary"),
            AugmentMethod::Llm if self.llm.is_none() => missing("an LLM client"),
            AugmentMethod::Bat => Err(Error::Config(
                "bat perturbs embeddings during training; enable adversarial training instead"
                    .into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AugmentRun {
    pub samples: Vec<AugmentedSample>,
    pub requested: usize,
    pub produced: usize,
    /// Why candidate attempts yielded nothing, by reason.
    pub skipped: BTreeMap<String, usize>,
}

fn hash_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Stable per-attempt seed from the master seed and source sentence.
pub fn derive_seed(master_seed: u64, source: &SourceId, attempt: u64) -> u64 {
    hash_u64(&[
        &master_seed.to_le_bytes(),
        source.doc_id.as_bytes(),
        &(source.sent_index as u64).to_le_bytes(),
        &attempt.to_le_bytes(),
    ])
}

fn selection_rng(master_seed: u64, target: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_u64(&[b"select", &master_seed.to_le_bytes(), target.as_bytes()]))
}

fn run_operator(
    method: AugmentMethod,
    sentence: &LabeledSentence,
    res: &AugmentResources<'_>,
    seed: u64,
    prompt_variant: u8,
) -> Result<Attempt> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match method {
        AugmentMethod::Aeda => Ok(Attempt::Done(Box::new(aeda(sentence, &mut rng, seed)))),
        AugmentMethod::VrRandom => try_verb_replace(
            sentence,
            res.lexicon.expect("checked"),
            VerbSource::Pool(res.verb_pool),
            &mut rng,
            seed,
        ),
        AugmentMethod::VrAntonym => try_verb_replace(
            sentence,
            res.lexicon.expect("checked"),
            VerbSource::Antonyms(res.antonyms.expect("checked")),
            &mut rng,
            seed,
        ),
        AugmentMethod::Er => try_entity_replace(
            sentence,
            res.annotator.expect("checked"),
            res.dictionary.expect("checked"),
            &mut rng,
            seed,
        ),
        AugmentMethod::Llm => {
            let client = res.llm.expect("checked");
            match llm_contradict(&sentence.text(), client, prompt_variant, res.llm_attempts) {
                Ok(text) => match rewrite_sample(sentence, &text, prompt_variant, seed) {
                    Ok(s) => Ok(Attempt::Done(Box::new(s))),
                    Err(Error::AugmentationFailed(_)) => Ok(Attempt::Skipped("llm empty completion")),
                    Err(e) => Err(e),
                },
                Err(Error::LlmRetriable { .. }) => Ok(Attempt::Skipped("llm unavailable")),
                Err(Error::AugmentationFailed(_)) => Ok(Attempt::Skipped("llm empty completion")),
                Err(e) => Err(e),
            }
        }
        AugmentMethod::Bat => unreachable!("rejected by resource check"),
    }
}

/// Augments sentences of `config.target_class`.
///
/// Sources are visited in a seeded shuffle of the target sentences, cycling
/// when more samples are requested than sources exist. A source that yields
/// nothing is skipped and the next one is tried. Runs inside the current
/// rayon pool; results are identical for any pool size.
pub fn augment_minority(
    sentences: &[LabeledSentence],
    config: &AugmentConfig,
    resources: &AugmentResources<'_>,
) -> Result<AugmentRun> {
    config.validate()?;
    resources.check(config.method)?;

    let mut order: Vec<usize> = sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| s.sentence_label == config.target_class && !s.is_empty())
        .map(|(i, _)| i)
        .collect();
    if order.is_empty() {
        return Err(Error::Validation(format!(
            "no sentences of class `{}` to augment",
            config.target_class
        )));
    }
    order.shuffle(&mut selection_rng(config.master_seed, &config.target_class));

    let available = order.len();
    let per = config.per_sentence;
    let needed = config.n_samples * per;
    let max_candidates = available * (config.n_samples.div_ceil(available) + 3);
    let first_half = config.n_samples.div_ceil(2);

    let mut run = AugmentRun {
        requested: needed,
        ..AugmentRun::default()
    };
    let mut next = 0;
    while run.samples.len() < needed && next < max_candidates {
        let remaining_sources = (needed - run.samples.len()).div_ceil(per);
        let end = (next + remaining_sources.max(32)).min(max_candidates);
        let jobs: Vec<(usize, usize)> = (next..end)
            .flat_map(|p| (0..per).map(move |k| (p, k)))
            .collect();
        let results: Vec<Result<Attempt>> = jobs
            .par_iter()
            .map(|&(p, k)| {
                let sentence = &sentences[order[p % available]];
                let attempt = (p / available) * per + k;
                let seed = derive_seed(config.master_seed, &SourceId::of(sentence), attempt as u64);
                let variant = if p < first_half { 1 } else { 2 };
                run_operator(config.method, sentence, resources, seed, variant)
            })
            .collect();
        for r in results {
            if run.samples.len() >= needed {
                break;
            }
            match r? {
                Attempt::Done(s) => run.samples.push(*s),
                Attempt::Skipped(reason) => *run.skipped.entry(reason.to_string()).or_default() += 1,
            }
        }
        next = end;
    }
    run.produced = run.samples.len();
    if run.produced == 0 {
        let mut histogram = String::new();
        for (reason, n) in &run.skipped {
            if !histogram.is_empty() {
                histogram.push_str(", ");
            }
            let _ = write!(histogram, "{reason}: {n}");
        }
        return Err(Error::NothingProduced {
            class: config.target_class.clone(),
            histogram,
        });
    }
    Ok(run)
}

/// One manifest line per augmented sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub method: AugmentMethod,
    pub source_id: SourceId,
    pub seed: u64,
    pub sentence_label: String,
    pub edit: Edit,
}

/// JSON lines, one record per sample, in sample order.
pub fn write_manifest(samples: &[AugmentedSample]) -> Result<String> {
    let mut out = String::new();
    for (index, s) in samples.iter().enumerate() {
        let rec = ManifestRecord {
            index,
            method: s.method,
            source_id: s.source_id.clone(),
            seed: s.seed,
            sentence_label: s.sentence.sentence_label.clone(),
            edit: s.edit.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Adds uniformly drawn duplicates of `target_class` sentences until the
/// class has `n` sentences.
pub fn oversample<R: Rng + ?Sized>(
    sentences: &[LabeledSentence],
    target_class: &str,
    n: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSentence>> {
    let pool: Vec<&LabeledSentence> = sentences
        .iter()
        .filter(|s| s.sentence_label == target_class)
        .collect();
    if pool.is_empty() {
        return Err(Error::Validation(format!("no sentences of class `{target_class}`")));
    }
    if n < pool.len() {
        return Err(Error::Validation(format!(
            "oversampling target {n} is below the current count {}",
            pool.len()
        )));
    }
    let mut out = sentences.to_vec();
    for _ in pool.len()..n {
        out.push((*pool.choose(rng).expect("non-empty")).clone());
    }
    Ok(out)
}

/// Keeps a uniform subset of `keep_n` sentences of `majority_class`; other
/// sentences and the relative order are kept.
pub fn undersample<R: Rng + ?Sized>(
    sentences: &[LabeledSentence],
    majority_class: &str,
    keep_n: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSentence>> {
    let members: Vec<usize> = sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| s.sentence_label == majority_class)
        .map(|(i, _)| i)
        .collect();
    if keep_n > members.len() {
        return Err(Error::Validation(format!(
            "cannot keep {keep_n} of {} `{majority_class}` sentences",
            members.len()
        )));
    }
    let mut keep = vec![true; sentences.len()];
    for &i in &members {
        keep[i] = false;
    }
    for j in index::sample(rng, members.len(), keep_n) {
        keep[members[j]] = true;
    }
    Ok(sentences
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelSchema};

    fn corpus(n_cla: usize, n_o: usize) -> Vec<LabeledSentence> {
        let schema = LabelSchema::new("O", ["CLA"]).unwrap();
        let mut out = Vec::new();
        for i in 0..n_cla + n_o {
            let label = if i < n_cla { "CLA" } else { "O" };
            let w = ["Patients", "reported", "that", "rifaximin", "helps", "."];
            let d = Document::from_tokens(format!("d{i}"), &w, vec![label.into(); w.len()]);
            out.push(LabeledSentence::from_labels(d.id.clone(), 0, d.tokens, d.token_labels, &schema));
        }
        out
    }

    fn cfg(method: AugmentMethod, n: usize, per: usize) -> AugmentConfig {
        AugmentConfig {
            target_class: "CLA".into(),
            n_samples: n,
            per_sentence: per,
            method,
            master_seed: 7,
        }
    }

    #[test]
    fn distinct_sources_when_available() {
        let s = corpus(401, 50);
        let run = augment_minority(&s, &cfg(AugmentMethod::Aeda, 400, 1), &AugmentResources::default())
            .unwrap();
        assert_eq!(run.produced, 400);
        let mut ids: Vec<_> = run.samples.iter().map(|x| x.source_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 400);
        assert!(run.samples.iter().all(|x| x.sentence.sentence_label == "CLA"));
    }

    #[test]
    fn per_sentence_multiplies() {
        let s = corpus(401, 0);
        let run = augment_minority(&s, &cfg(AugmentMethod::Aeda, 400, 4), &AugmentResources::default())
            .unwrap();
        assert_eq!(run.produced, 1600);
        let run = augment_minority(&s, &cfg(AugmentMethod::Aeda, 100, 1), &AugmentResources::default())
            .unwrap();
        assert_eq!(run.produced, 100);
    }

    #[test]
    fn cycles_when_short() {
        let s = corpus(3, 2);
        let run = augment_minority(&s, &cfg(AugmentMethod::Aeda, 10, 1), &AugmentResources::default())
            .unwrap();
        assert_eq!(run.produced, 10);
    }

    #[test]
    fn nothing_produced_reports_histogram() {
        let s = corpus(5, 0);
        let dict = EntityDictionary::default();
        let no_entities = |_: &LabeledSentence| Vec::new();
        let res = AugmentResources {
            annotator: Some(&no_entities),
            dictionary: Some(&dict),
            ..AugmentResources::default()
        };
        match augment_minority(&s, &cfg(AugmentMethod::Er, 4, 1), &res) {
            Err(Error::NothingProduced { histogram, .. }) => assert!(histogram.contains("no entity")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_class_and_bat_rejected() {
        let s = corpus(0, 3);
        assert!(augment_minority(&s, &cfg(AugmentMethod::Aeda, 1, 1), &AugmentResources::default()).is_err());
        let s = corpus(3, 0);
        assert!(matches!(
            augment_minority(&s, &cfg(AugmentMethod::Bat, 1, 1), &AugmentResources::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn seeds_are_stable() {
        let id = SourceId { doc_id: "doc3".into(), sent_index: 2 };
        assert_eq!(derive_seed(7, &id, 0), derive_seed(7, &id, 0));
        assert_ne!(derive_seed(7, &id, 0), derive_seed(7, &id, 1));
        assert_ne!(derive_seed(7, &id, 0), derive_seed(8, &id, 0));
    }

    #[test]
    fn manifest_lines() {
        let s = corpus(3, 0);
        let run = augment_minority(&s, &cfg(AugmentMethod::Aeda, 3, 1), &AugmentResources::default())
            .unwrap();
        let m = write_manifest(&run.samples).unwrap();
        assert_eq!(m.lines().count(), 3);
        let rec: ManifestRecord = serde_json::from_str(m.lines().next().unwrap()).unwrap();
        assert_eq!(rec.method, AugmentMethod::Aeda);
    }

    #[test]
    fn over_and_under_sampling() {
        let s = corpus(10, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let over = oversample(&s, "CLA", 20, &mut rng).unwrap();
        assert_eq!(over.iter().filter(|x| x.sentence_label == "CLA").count(), 20);
        let under = undersample(&s, "O", 15, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(under.iter().filter(|x| x.sentence_label == "O").count(), 15);
        assert_eq!(under.len(), 25);
        let again = undersample(&s, "O", 15, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(under, again);
        assert!(undersample(&s, "O", 41, &mut rng).is_err());
    }
}
