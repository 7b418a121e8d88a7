use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use claimaug::augment::{augment_minority, write_manifest, AugmentMethod};
use claimaug::corpus::{dataset_stats, write_token_label_file};
use claimaug::eval::{compare, MetricsReport};
use claimaug::experiment::{evaluate, run_experiment, train_model, ExperimentSpec, ModelKind, Resources, TrainedModel};
use claimaug::fixture::{self, FixtureSpec};
use claimaug::senttok::{purity_stats, PurityStats};
use claimaug::{Dataset, Document, LabelSchema, LabeledSentence, SentenceSplitter};
use serde::Serialize;

use crate::config::{augment_config, Config};
use crate::{load_schema, read_dataset, write_atomic, Cli, CliError, Command, Format};

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::new(crate::EXIT_FAILURE, format!("stdout: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Stats { file, schema, sentences } => stats(cli, out, file, schema.as_deref(), *sentences),
        Command::Split { file, out: dest, schema } => split(cli, out, file, dest, schema.as_deref()),
        Command::BuildLexicons { train, out_dir, schema } => build_lexicons(out, train, out_dir, schema.as_deref()),
        Command::Augment { config } => augment(cli, out, config),
        Command::TrainCrf { config } => train(cli, out, config, ModelKind::Crf),
        Command::TrainClf { config } => train(cli, out, config, ModelKind::Textclf),
        Command::Eval { model, data, schema, out: dest } => eval(cli, out, model, data, schema.as_deref(), dest.as_deref()),
        Command::Compare { reports, out: dest } => compare_cmd(cli, out, reports, dest.as_deref()),
        Command::MakeFixture { out_dir, sizes, dev_sizes } => {
            make_fixture(cli, out, out_dir, sizes.as_deref(), dev_sizes.as_deref())
        }
        Command::RunExperiment { config } => experiment(cli, out, config),
    }
}

fn sentences_of(ds: &Dataset) -> Vec<LabeledSentence> {
    SentenceSplitter::default().split_all(&ds.documents, &ds.schema)
}

#[derive(Serialize)]
struct PurityOut<'a> {
    #[serde(flatten)]
    stats: &'a PurityStats,
    uniform_fraction: f64,
}

fn stats(cli: &Cli, out: &mut dyn Write, file: &Path, schema: Option<&Path>, with_sentences: bool) -> Result<(), CliError> {
    let schema = load_schema(schema, file)?;
    let ds = read_dataset(file, &schema)?;
    let st = dataset_stats(&ds);
    let purity = with_sentences.then(|| purity_stats(&sentences_of(&ds)));
    match cli.format {
        Format::Json => {
            let mut v = serde_json::json!({ "stats": st, "total_tokens": st.total_tokens() });
            if let Some(p) = &purity {
                v["purity"] = serde_json::to_value(PurityOut { stats: p, uniform_fraction: p.uniform_fraction() })
                    .expect("serializable");
            }
            emit(out, &to_json(&v)?)
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "texts         {}", st.n_texts);
            let _ = writeln!(s, "unique words  {}", st.n_unique_words);
            let _ = writeln!(s, "max length    {}", st.max_length);
            let _ = writeln!(s, "tokens        {}", st.total_tokens());
            let _ = writeln!(s, "label distribution (tokens)");
            for l in schema.all_labels() {
                let _ = writeln!(s, "  {l:<10} {}", st.label_dist.get(l).copied().unwrap_or(0));
            }
            if let Some(p) = &purity {
                let _ = writeln!(s, "sentences     {}", p.n_sentences);
                let _ = writeln!(s, "uniform       {} ({:.1}%)", p.n_uniform, 100.0 * p.uniform_fraction());
                let _ = writeln!(s, "sentences per majority label");
                for l in schema.all_labels() {
                    let _ = writeln!(s, "  {l:<10} {}", p.per_class.get(l).copied().unwrap_or(0));
                }
            }
            emit(out, &s)
        }
    }
}

fn sentence_documents(sentences: &[LabeledSentence]) -> Vec<Document> {
    sentences
        .iter()
        .map(|s| s.to_document(format!("{}:{}", s.doc_id, s.sent_index)))
        .collect()
}

fn split(cli: &Cli, out: &mut dyn Write, file: &Path, dest: &Path, schema: Option<&Path>) -> Result<(), CliError> {
    let schema = load_schema(schema, file)?;
    let ds = read_dataset(file, &schema)?;
    let sents = sentences_of(&ds);
    write_atomic(dest, write_token_label_file(&sentence_documents(&sents)).as_bytes())?;
    let p = purity_stats(&sents);
    match cli.format {
        Format::Json => emit(out, &to_json(&PurityOut { stats: &p, uniform_fraction: p.uniform_fraction() })?),
        Format::Table => emit(
            out,
            &format!(
                "wrote {} sentences to {} ({:.1}% uniform)\n",
                p.n_sentences,
                dest.display(),
                100.0 * p.uniform_fraction()
            ),
        ),
    }
}

fn build_lexicons(out: &mut dyn Write, train: &Path, out_dir: &Path, schema: Option<&Path>) -> Result<(), CliError> {
    let schema = load_schema(schema, train)?;
    let ds = read_dataset(train, &schema)?;
    let res = Resources::from_training(&sentences_of(&ds), None);
    let mut pool = res.verb_pool.join("\n");
    pool.push('\n');
    write_atomic(&out_dir.join("verb_pool.txt"), pool.as_bytes())?;
    write_atomic(&out_dir.join("entities.tsv"), res.dictionary.to_tsv().as_bytes())?;
    let verbs = res.lexicon.subset(res.verb_pool.iter().map(String::as_str));
    write_atomic(&out_dir.join("verbs.tsv"), verbs.to_tsv().as_bytes())?;
    let mut ants = String::from("# base\tantonyms (comma-separated base forms)\n");
    for (base, list) in res.antonyms.iter() {
        if res.verb_pool.iter().any(|v| v == base) {
            let _ = writeln!(ants, "{base}\t{}", list.join(","));
        }
    }
    write_atomic(&out_dir.join("antonyms.tsv"), ants.as_bytes())?;
    emit(
        out,
        &format!(
            "verbs {}  entities {}  -> {}\n",
            res.verb_pool.len(),
            res.dictionary.len(),
            out_dir.display()
        ),
    )
}

struct Loaded {
    cfg: Config,
    seed: u64,
    schema: LabelSchema,
    train: Dataset,
}

fn load_training(cli: &Cli, config: &Path) -> Result<Loaded, CliError> {
    let cfg = Config::load(config)?;
    let seed = cfg.seed(cli.seed)?;
    let train_path = cfg.input(&cfg.data.train, "data.train")?;
    let schema = load_schema(cfg.schema_path()?.as_deref(), &train_path)?;
    let train = read_dataset(&train_path, &schema)?;
    let schema = schema.with_frequencies_from(&train);
    let train = Dataset { schema: schema.clone(), ..train };
    Ok(Loaded { cfg, seed, schema, train })
}

fn resources(cfg: &Config, cli: &Cli, sentences: &[LabeledSentence], method: Option<AugmentMethod>) -> Result<Resources, CliError> {
    let llm = cfg.llm_client(cli.offline);
    if method == Some(AugmentMethod::Llm) && llm.is_none() {
        return Err(CliError::config("llm augmentation needs an [llm] endpoint or --offline"));
    }
    let mut res = Resources::from_training(sentences, None);
    if let Some((client, attempts)) = llm {
        res.llm = Some(client);
        res.llm_attempts = attempts;
    }
    Ok(res)
}

#[derive(Serialize)]
struct AugmentSummaryOut {
    method: String,
    target_class: String,
    requested: usize,
    produced: usize,
    skipped: BTreeMap<String, usize>,
    corpus: PathBuf,
    manifest: PathBuf,
}

fn augment(cli: &Cli, out: &mut dyn Write, config: &Path) -> Result<(), CliError> {
    let Loaded { cfg, seed, schema, train } = load_training(cli, config)?;
    let section = cfg
        .augment
        .as_ref()
        .ok_or_else(|| CliError::config("config has no [augment] section"))?;
    let acfg = augment_config(
        &section.method,
        section.n_samples,
        section.per_sentence,
        section.target_class.as_deref(),
        &schema,
        seed,
    )?;
    let sents = sentences_of(&train);
    let res = resources(&cfg, cli, &sents, Some(acfg.method))?;
    let run = augment_minority(&sents, &acfg, &res.view())?;

    let dir = cfg.output_dir();
    let docs: Vec<Document> = run
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| s.sentence.to_document(format!("aug{i}")))
        .collect();
    let corpus = dir.join("augmented.tsv");
    let manifest = dir.join("manifest.jsonl");
    write_atomic(&corpus, write_token_label_file(&docs).as_bytes())?;
    write_atomic(&manifest, write_manifest(&run.samples)?.as_bytes())?;

    let summary = AugmentSummaryOut {
        method: acfg.method.to_string(),
        target_class: acfg.target_class,
        requested: run.requested,
        produced: run.produced,
        skipped: run.skipped,
        corpus,
        manifest,
    };
    match cli.format {
        Format::Json => emit(out, &to_json(&summary)?),
        Format::Table => {
            let mut s = format!(
                "method     {}\ntarget     {}\nrequested  {}\nproduced   {}\n",
                summary.method, summary.target_class, summary.requested, summary.produced
            );
            for (reason, n) in &summary.skipped {
                let _ = writeln!(s, "skipped    {n} ({reason})");
            }
            emit(out, &s)
        }
    }
}

/// Augmented-corpus documents are single sentences already; they are not
/// re-split, since inserted punctuation would break them apart.
fn augmented_sentences(cfg: &Config, schema: &LabelSchema) -> Result<Vec<LabeledSentence>, CliError> {
    let Some(_) = &cfg.data.augmented else { return Ok(Vec::new()) };
    let path = cfg.input(&cfg.data.augmented, "data.augmented")?;
    let ds = read_dataset(&path, schema)?;
    Ok(ds
        .documents
        .into_iter()
        .map(|d| LabeledSentence::from_labels(d.id, 0, d.tokens, d.token_labels, schema))
        .collect())
}

fn spec_for(cfg: &Config, seed: u64, model: ModelKind) -> ExperimentSpec {
    ExperimentSpec {
        model,
        augment: None,
        crf: cfg.crf_config(seed),
        clf: cfg.clf_config(seed),
        adv: cfg.adv_config(),
    }
}

fn train(cli: &Cli, out: &mut dyn Write, config: &Path, kind: ModelKind) -> Result<(), CliError> {
    let Loaded { cfg, seed, schema, train } = load_training(cli, config)?;
    let mut sents = sentences_of(&train);
    sents.extend(augmented_sentences(&cfg, &schema)?);
    let model = train_model(&sents, &schema, &spec_for(&cfg, seed, kind))?;
    let name = match kind {
        ModelKind::Crf => "crf-model.json",
        ModelKind::Textclf => "textclf-model.json",
    };
    let path = cfg.output_dir().join(name);
    write_atomic(&path, model.to_json()?.as_bytes())?;
    let train_report = evaluate(&model, &sents, &schema)?;
    match cli.format {
        Format::Json => emit(
            out,
            &to_json(&serde_json::json!({
                "model": path,
                "sentences": sents.len(),
                "train_macro_f1": train_report.macro_avg.f1,
            }))?,
        ),
        Format::Table => emit(
            out,
            &format!(
                "trained on {} sentences; training macro F1 {:.1}; wrote {}\n",
                sents.len(),
                train_report.macro_avg.f1,
                path.display()
            ),
        ),
    }
}

fn print_report(cli: &Cli, out: &mut dyn Write, report: &MetricsReport) -> Result<(), CliError> {
    match cli.format {
        Format::Json => emit(out, &to_json(report)?),
        Format::Table => emit(out, &report.to_table()),
    }
}

fn eval(
    cli: &Cli,
    out: &mut dyn Write,
    model: &Path,
    data: &Path,
    schema: Option<&Path>,
    dest: Option<&Path>,
) -> Result<(), CliError> {
    if !model.is_file() {
        return Err(CliError::missing(model));
    }
    let text = std::fs::read_to_string(model).map_err(|e| CliError::io(model, e))?;
    let m = TrainedModel::from_json(&text).map_err(|e| CliError::from_core(Some(model), e))?;
    let schema = load_schema(schema, data)?;
    let ds = read_dataset(data, &schema)?;
    let report = evaluate(&m, &sentences_of(&ds), &schema)?;
    if let Some(d) = dest {
        write_atomic(d, to_json(&report)?.as_bytes())?;
    }
    print_report(cli, out, &report)
}

fn compare_cmd(cli: &Cli, out: &mut dyn Write, specs: &[String], dest: Option<&Path>) -> Result<(), CliError> {
    let mut reports = BTreeMap::new();
    for spec in specs {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (stem, p)
            }
        };
        if !path.is_file() {
            return Err(CliError::missing(&path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let report: MetricsReport =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if reports.insert(name.clone(), report).is_some() {
            return Err(CliError::config(format!("duplicate method name `{name}`")));
        }
    }
    let table = compare(&reports)?;
    if let Some(d) = dest {
        write_atomic(d, format!("{}\n", table.to_json()?).as_bytes())?;
    }
    match cli.format {
        Format::Json => emit(out, &format!("{}\n", table.to_json()?)),
        Format::Table => emit(out, &table.to_table()),
    }
}

fn parse_sizes(text: &str, into: &mut BTreeMap<String, usize>) -> Result<(), CliError> {
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected CLASS=COUNT, got `{item}`")))?;
        let n = v
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad count in `{item}`")))?;
        into.insert(k.trim().to_string(), n);
    }
    Ok(())
}

fn make_fixture(
    cli: &Cli,
    out: &mut dyn Write,
    out_dir: &Path,
    sizes: Option<&str>,
    dev_sizes: Option<&str>,
) -> Result<(), CliError> {
    let seed = cli
        .seed
        .ok_or_else(|| CliError::config("make-fixture needs --seed"))?;
    let mut spec = FixtureSpec::default();
    if let Some(s) = sizes {
        parse_sizes(s, &mut spec.train_sizes)?;
    }
    if let Some(s) = dev_sizes {
        parse_sizes(s, &mut spec.dev_sizes)?;
    }
    let fx = fixture::generate(&spec, seed)?;
    write_atomic(&out_dir.join("train.tsv"), write_token_label_file(&fx.train.dataset.documents).as_bytes())?;
    write_atomic(&out_dir.join("dev.tsv"), write_token_label_file(&fx.dev.dataset.documents).as_bytes())?;
    write_atomic(&out_dir.join("schema.cfg"), fx.train.dataset.schema.to_config().as_bytes())?;
    let book = serde_json::json!({ "seed": seed, "train": fx.train.bookkeeping, "dev": fx.dev.bookkeeping });
    write_atomic(&out_dir.join("bookkeeping.json"), to_json(&book)?.as_bytes())?;
    match cli.format {
        Format::Json => emit(out, &to_json(&book)?),
        Format::Table => {
            let mut s = String::new();
            for (name, b) in [("train", &fx.train.bookkeeping), ("dev", &fx.dev.bookkeeping)] {
                let _ = write!(s, "{name}: {} documents, {} sentences (", b.n_documents, b.n_sentences);
                let parts: Vec<String> = b.sentences_per_class.iter().map(|(c, n)| format!("{c} {n}")).collect();
                let _ = writeln!(s, "{})", parts.join(", "));
            }
            let _ = writeln!(s, "wrote {}", out_dir.display());
            emit(out, &s)
        }
    }
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn experiment(cli: &Cli, out: &mut dyn Write, config: &Path) -> Result<(), CliError> {
    let Loaded { cfg, seed, schema, train } = load_training(cli, config)?;
    let dev_path = cfg.input(&cfg.data.dev, "data.dev")?;
    let dev = read_dataset(&dev_path, &schema)?;
    if cfg.runs.is_empty() {
        return Err(CliError::config("config has no [[runs]]"));
    }
    let model = cfg.model.unwrap_or(ModelKind::Textclf);
    let mut specs = Vec::new();
    let mut slugs = std::collections::BTreeSet::new();
    for run in &cfg.runs {
        if !slugs.insert(slug(&run.name)) {
            return Err(CliError::config(format!("duplicate run name `{}`", run.name)));
        }
        let mut spec = spec_for(&cfg, seed, model);
        spec.augment = match (&run.method, run.n_samples) {
            (Some(m), Some(n)) => Some(augment_config(m, n, run.per_sentence, run.target_class.as_deref(), &schema, seed)?),
            (None, None) => None,
            _ => return Err(CliError::config(format!("run `{}` needs both method and n_samples", run.name))),
        };
        specs.push((run.name.clone(), spec));
    }
    let needs_llm = specs.iter().any(|(_, s)| s.augment.as_ref().is_some_and(|a| a.method == AugmentMethod::Llm));
    let res = resources(&cfg, cli, &sentences_of(&train), needs_llm.then_some(AugmentMethod::Llm))?;

    let dir = cfg.output_dir();
    let mut reports = BTreeMap::new();
    let mut log = String::new();
    for (name, spec) in &specs {
        let outcome = run_experiment(&train, &dev, spec, &res)?;
        write_atomic(&dir.join(format!("report-{}.json", slug(name))), to_json(&outcome.report)?.as_bytes())?;
        match &outcome.augmentation {
            Some(a) => {
                let _ = writeln!(log, "{name}: {} training sentences, {}/{} augmented", outcome.n_train_sentences, a.produced, a.requested);
            }
            None => {
                let _ = writeln!(log, "{name}: {} training sentences", outcome.n_train_sentences);
            }
        }
        reports.insert(name.clone(), outcome.report);
    }
    let table = compare(&reports)?;
    write_atomic(&dir.join("comparison.json"), format!("{}\n", table.to_json()?).as_bytes())?;
    write_atomic(&dir.join("comparison.txt"), table.to_table().as_bytes())?;
    match cli.format {
        Format::Json => emit(out, &format!("{}\n", table.to_json()?)),
        Format::Table => emit(out, &format!("{log}\n{}", table.to_table())),
    }
}
