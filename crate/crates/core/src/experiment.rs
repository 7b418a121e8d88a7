//! Split, augment, train and score in one call.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::augment::{
    augment_minority, default_entity_annotator, verb_pool, AugmentConfig, AugmentResources,
    AugmentedSample, EntityAnnotator, EntityDictionary, LlmClient,
};
use crate::corpus::{Dataset, LabelSchema};
use crate::crf::{self, CrfModel, FeatureTemplate};
use crate::error::{Error, Result};
use crate::eval::{score, MetricsReport};
use crate::morph::{AntonymLexicon, VerbLexicon};
use crate::senttok::{project_labels, LabeledSentence, SentenceSplitter};
use crate::textclf::{self, AdvConfig, ClfTrainConfig, TextClassifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Crf,
    Textclf,
}

/// Owned lexicons, dictionaries and clients for the augmentation operators.
pub struct Resources {
    pub lexicon: VerbLexicon,
    pub antonyms: AntonymLexicon,
    pub verb_pool: Vec<String>,
    pub dictionary: EntityDictionary,
    pub annotator: Box<dyn EntityAnnotator>,
    pub llm: Option<Box<dyn LlmClient>>,
    pub llm_attempts: usize,
}

impl Resources {
    /// Bundled lexicons, the pattern entity annotator, and a verb pool and
    /// entity dictionary harvested from `training`.
    pub fn from_training(training: &[LabeledSentence], llm: Option<Box<dyn LlmClient>>) -> Self {
        let lexicon = VerbLexicon::bundled();
        let annotator: Box<dyn EntityAnnotator> = Box::new(default_entity_annotator);
        Resources {
            verb_pool: verb_pool(training, &lexicon),
            dictionary: EntityDictionary::build(training, annotator.as_ref()),
            lexicon,
            antonyms: AntonymLexicon::bundled(),
            annotator,
            llm,
            llm_attempts: 3,
        }
    }

    pub fn view(&self) -> AugmentResources<'_> {
        AugmentResources {
            lexicon: Some(&self.lexicon),
            verb_pool: &self.verb_pool,
            antonyms: Some(&self.antonyms),
            annotator: Some(self.annotator.as_ref()),
            dictionary: Some(&self.dictionary),
            llm: self.llm.as_deref(),
            llm_attempts: self.llm_attempts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub augment: Option<AugmentConfig>,
    pub crf: crf::TrainConfig,
    pub clf: ClfTrainConfig,
    pub adv: AdvConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Crf(CrfModel),
    Textclf(TextClassifier),
}

impl TrainedModel {
    /// Token-level predictions. The classifier labels whole sentences and
    /// projects the label onto their tokens; the CRF labels tokens directly.
    pub fn predict_tokens(&self, sentences: &[LabeledSentence]) -> Vec<String> {
        let mut out = Vec::new();
        for s in sentences {
            let words: Vec<&str> = s.words().collect();
            match self {
                TrainedModel::Crf(m) => out.extend(m.predict(&words)),
                TrainedModel::Textclf(m) => out.extend(project_labels(m.predict(&words), words.len())),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            TrainedModel::Crf(m) => m.to_json(),
            TrainedModel::Textclf(m) => m.to_json(),
        }
    }

    /// Reads either model format.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
        }
        let h: Header = serde_json::from_str(text)?;
        match h.format.as_str() {
            "claimaug-crf" => Ok(TrainedModel::Crf(CrfModel::from_json(text)?)),
            "claimaug-textclf" => Ok(TrainedModel::Textclf(TextClassifier::from_json(text)?)),
            other => Err(Error::Config(format!("unknown model format `{other}`"))),
        }
    }
}

pub fn train_model(
    sentences: &[LabeledSentence],
    schema: &LabelSchema,
    spec: &ExperimentSpec,
) -> Result<TrainedModel> {
    Ok(match spec.model {
        ModelKind::Crf => {
            let mut m = CrfModel::new(
                schema.all_labels().map(String::from).collect(),
                FeatureTemplate::default_set(),
            );
            crf::train(&mut m, sentences, &spec.crf)?;
            TrainedModel::Crf(m)
        }
        ModelKind::Textclf => {
            TrainedModel::Textclf(textclf::train_classifier(sentences, schema, &spec.clf, &spec.adv)?.0)
        }
    })
}

/// Scores token-level predictions on `sentences` against their gold labels.
pub fn evaluate(model: &TrainedModel, sentences: &[LabeledSentence], schema: &LabelSchema) -> Result<MetricsReport> {
    let gold: Vec<&str> = sentences
        .iter()
        .flat_map(|s| s.token_labels.iter().map(String::as_str))
        .collect();
    score(&gold, &model.predict_tokens(sentences), schema)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub requested: usize,
    pub produced: usize,
    pub skipped: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub augmentation: Option<AugmentSummary>,
    pub samples: Vec<AugmentedSample>,
    pub n_train_sentences: usize,
}

/// Splits both sets into sentences, adds augmented minority sentences to the
/// training side, trains, and scores token-level on `dev`.
pub fn run_experiment(
    train: &Dataset,
    dev: &Dataset,
    spec: &ExperimentSpec,
    resources: &Resources,
) -> Result<ExperimentOutcome> {
    let splitter = SentenceSplitter::default();
    let mut train_sents = splitter.split_all(&train.documents, &train.schema);
    let dev_sents = splitter.split_all(&dev.documents, &dev.schema);

    let (augmentation, samples) = match &spec.augment {
        Some(cfg) => {
            let run = augment_minority(&train_sents, cfg, &resources.view())?;
            train_sents.extend(run.samples.iter().map(|s| s.sentence.clone()));
            (
                Some(AugmentSummary {
                    requested: run.requested,
                    produced: run.produced,
                    skipped: run.skipped,
                }),
                run.samples,
            )
        }
        None => (None, Vec::new()),
    };

    let model = train_model(&train_sents, &train.schema, spec)?;
    Ok(ExperimentOutcome {
        report: evaluate(&model, &dev_sents, &dev.schema)?,
        augmentation,
        samples,
        n_train_sentences: train_sents.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{AugmentMethod, MockLlmClient};
    use crate::fixture::{generate, FixtureSpec, CLASSES};

    fn tiny() -> FixtureSpec {
        let sizes = |v: [usize; 5]| CLASSES.iter().map(|c| c.to_string()).zip(v).collect();
        FixtureSpec {
            train_sizes: sizes([120, 6, 20, 50, 30]),
            dev_sizes: sizes([60, 4, 10, 25, 15]),
            ..FixtureSpec::default()
        }
    }

    fn spec(model: ModelKind, augment: Option<AugmentConfig>) -> ExperimentSpec {
        ExperimentSpec {
            model,
            augment,
            crf: crf::TrainConfig { epochs: 3, ..Default::default() },
            clf: ClfTrainConfig { epochs: 5, ..Default::default() },
            adv: AdvConfig::default(),
        }
    }

    #[test]
    fn both_models_run_and_are_deterministic() {
        let fx = generate(&tiny(), 1).unwrap();
        let train = splitter_sentences(&fx.train.dataset);
        let res = Resources::from_training(&train, Some(Box::new(MockLlmClient::new())));
        for model in [ModelKind::Crf, ModelKind::Textclf] {
            for method in [AugmentMethod::VrRandom, AugmentMethod::Er, AugmentMethod::Llm] {
                let aug = AugmentConfig {
                    target_class: "CLA".into(),
                    n_samples: 10,
                    per_sentence: 1,
                    method,
                    master_seed: 5,
                };
                let s = spec(model, Some(aug));
                let a = run_experiment(&fx.train.dataset, &fx.dev.dataset, &s, &res).unwrap();
                let b = run_experiment(&fx.train.dataset, &fx.dev.dataset, &s, &res).unwrap();
                assert_eq!(a, b);
                assert_eq!(a.augmentation.unwrap().produced, 10);
                assert_eq!(a.n_train_sentences, 226 + 10);
            }
        }
    }

    #[test]
    fn model_json_dispatch() {
        let fx = generate(&tiny(), 2).unwrap();
        let sents = splitter_sentences(&fx.train.dataset);
        for kind in [ModelKind::Crf, ModelKind::Textclf] {
            let m = train_model(&sents, &fx.train.dataset.schema, &spec(kind, None)).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict_tokens(&sents[..5]), m.predict_tokens(&sents[..5]));
        }
        assert!(TrainedModel::from_json(r#"{"format":"other"}"#).is_err());
    }

    fn splitter_sentences(ds: &Dataset) -> Vec<LabeledSentence> {
        SentenceSplitter::default().split_all(&ds.documents, &ds.schema)
    }
}
