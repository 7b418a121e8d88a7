//! Corpus data model: tokens, label schema, documents, spans, and the
//! token-label / span / schema file formats.
//!
//! Span arithmetic is always in token indices. Token offsets are byte
//! offsets into the owning text; for token-only input the text is
//! synthesized by joining tokens with single spaces.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize) -> Self {
        let text = text.into();
        let end = start + text.len();
        Token { text, start, end }
    }

    /// True when `next` follows this token with no whitespace in between.
    pub fn is_glued_to(&self, next: &Token) -> bool {
        self.end == next.start
    }
}

/// Lays out token strings into a text, returning the text and tokens whose
/// offsets slice it. `glue[i]` requests no space before token `i`.
pub fn layout_tokens<S: AsRef<str>>(pieces: &[(S, bool)]) -> (String, Vec<Token>) {
    let mut text = String::new();
    let mut tokens = Vec::with_capacity(pieces.len());
    for (i, (piece, glue)) in pieces.iter().enumerate() {
        if i > 0 && !glue {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(piece.as_ref());
        tokens.push(Token::new(piece.as_ref(), start));
    }
    (text, tokens)
}

/// Renders tokens as text, keeping source adjacency (no space between tokens
/// that were glued in the source) and a single space elsewhere.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 && !tokens[i - 1].is_glued_to(tok) {
            out.push(' ');
        }
        out.push_str(&tok.text);
    }
    out
}

fn word_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+(?:['\-]\w+)*|[^\w\s]").expect("valid regex"))
}

/// Splits raw text into word and punctuation tokens with byte offsets.
pub fn tokenize_text(text: &str) -> Vec<Token> {
    word_regex()
        .find_iter(text)
        .map(|m| Token {
            text: m.as_str().to_string(),
            start: m.start(),
            end: m.end(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    outside_label: String,
    categories: Vec<String>,
    train_freq: BTreeMap<String, u64>,
}

impl LabelSchema {
    pub fn new<S: Into<String>>(
        outside_label: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let outside_label = outside_label.into();
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        if outside_label.is_empty() {
            return Err(Error::Schema("outside label is empty".into()));
        }
        if categories.is_empty() {
            return Err(Error::Schema("no categories declared".into()));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if c.is_empty() || c.contains(char::is_whitespace) {
                return Err(Error::Schema(format!("invalid category name `{c}`")));
            }
            if *c == outside_label {
                return Err(Error::Schema(format!(
                    "outside label `{c}` also listed as a category"
                )));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("duplicate category `{c}`")));
            }
        }
        Ok(LabelSchema {
            outside_label,
            categories,
            train_freq: BTreeMap::new(),
        })
    }

    pub fn outside_label(&self) -> &str {
        &self.outside_label
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Outside label followed by the categories in declared order.
    pub fn all_labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.outside_label.as_str()).chain(self.categories.iter().map(String::as_str))
    }

    pub fn num_labels(&self) -> usize {
        self.categories.len() + 1
    }

    /// Position of `label` in [`all_labels`](Self::all_labels).
    pub fn label_index(&self, label: &str) -> Option<usize> {
        if label == self.outside_label {
            return Some(0);
        }
        self.categories.iter().position(|c| c == label).map(|i| i + 1)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.label_index(label).is_some()
    }

    pub fn is_category(&self, label: &str) -> bool {
        self.categories.iter().any(|c| c == label)
    }

    /// Training token count for `label`; undeclared labels count as 0.
    pub fn train_freq(&self, label: &str) -> u64 {
        self.train_freq.get(label).copied().unwrap_or(0)
    }

    pub fn train_freqs(&self) -> &BTreeMap<String, u64> {
        &self.train_freq
    }

    pub fn set_train_freq(&mut self, label: &str, count: u64) -> Result<()> {
        if !self.contains(label) {
            return Err(Error::Schema(format!("frequency for unknown label `{label}`")));
        }
        self.train_freq.insert(label.to_string(), count);
        Ok(())
    }

    /// Replaces the frequency table with token counts from `dataset`.
    pub fn with_frequencies_from(mut self, dataset: &Dataset) -> Self {
        self.train_freq = self.all_labels().map(|l| (l.to_string(), 0)).collect();
        for doc in &dataset.documents {
            for label in &doc.token_labels {
                *self.train_freq.entry(label.clone()).or_insert(0) += 1;
            }
        }
        self
    }

    /// Parses the key-value schema config:
    ///
    /// ```text
    /// outside = O
    /// categories = CLA, EXP, PER, QUE
    /// freq.CLA = 8183
    /// ```
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut outside = None;
        let mut categories = None;
        let mut freqs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "outside" => outside = Some(value.to_string()),
                "categories" => {
                    categories = Some(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect::<Vec<_>>(),
                    )
                }
                _ => {
                    let label = key
                        .strip_prefix("freq.")
                        .ok_or_else(|| Error::parse(line_no, format!("unknown key `{key}`")))?;
                    let count: u64 = value
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad frequency `{value}`")))?;
                    freqs.push((line_no, label.to_string(), count));
                }
            }
        }
        let outside = outside.ok_or_else(|| Error::Schema("missing `outside` key".into()))?;
        let categories =
            categories.ok_or_else(|| Error::Schema("missing `categories` key".into()))?;
        let mut schema = LabelSchema::new(outside, categories)?;
        for (line_no, label, count) in freqs {
            schema
                .set_train_freq(&label, count)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        Ok(schema)
    }

    pub fn to_config(&self) -> String {
        let mut out = format!(
            "outside = {}\ncategories = {}\n",
            self.outside_label,
            self.categories.join(", ")
        );
        for label in self.all_labels() {
            if let Some(f) = self.train_freq.get(label) {
                let _ = writeln!(out, "freq.{label} = {f}");
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub token_labels: Vec<String>,
}

impl Document {
    /// Builds a document from bare token strings, synthesizing the text by
    /// joining them with single spaces.
    pub fn from_tokens<S: AsRef<str>>(
        id: impl Into<String>,
        tokens: &[S],
        token_labels: Vec<String>,
    ) -> Self {
        let pieces: Vec<(&str, bool)> = tokens.iter().map(|t| (t.as_ref(), false)).collect();
        let (text, tokens) = layout_tokens(&pieces);
        Document {
            id: id.into(),
            text,
            tokens,
            token_labels,
        }
    }

    /// Tokenizes raw text; every token gets `label`.
    pub fn from_text(id: impl Into<String>, text: impl Into<String>, label: &str) -> Self {
        let text = text.into();
        let tokens = tokenize_text(&text);
        let token_labels = vec![label.to_string(); tokens.len()];
        Document {
            id: id.into(),
            text,
            tokens,
            token_labels,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self, schema: &LabelSchema) -> Result<()> {
        if self.tokens.len() != self.token_labels.len() {
            return Err(Error::Validation(format!(
                "document `{}`: {} tokens but {} labels",
                self.id,
                self.tokens.len(),
                self.token_labels.len()
            )));
        }
        for (tok, label) in self.tokens.iter().zip(&self.token_labels) {
            if tok.start >= tok.end || self.text.get(tok.start..tok.end) != Some(tok.text.as_str())
            {
                return Err(Error::Validation(format!(
                    "document `{}`: token `{}` does not match its offsets",
                    self.id, tok.text
                )));
            }
            if !schema.contains(label) {
                return Err(Error::Schema(format!(
                    "document `{}`: unknown label `{label}`",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub doc_id: String,
    pub token_start: usize,
    pub token_end: usize,
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: LabelSchema,
    pub documents: Vec<Document>,
}

impl Dataset {
    pub fn new(schema: LabelSchema, documents: Vec<Document>) -> Result<Self> {
        for doc in &documents {
            doc.validate(&schema)?;
        }
        Ok(Dataset { schema, documents })
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }
}

fn default_doc_id(index: usize) -> String {
    format!("doc{index}")
}

const ID_HEADER: &str = "# id = ";

/// Parses the CoNLL-style `token<TAB>label` format. Blank lines separate
/// documents; an optional `# id = NAME` line names the following document.
pub fn parse_token_label_file(bytes: &[u8], schema: &LabelSchema) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "invalid UTF-8")
    })?;

    let mut documents = Vec::new();
    let mut pending_id: Option<String> = None;
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();

    let flush = |pending_id: &mut Option<String>,
                     tokens: &mut Vec<String>,
                     labels: &mut Vec<String>,
                     documents: &mut Vec<Document>| {
        if tokens.is_empty() {
            return;
        }
        let id = pending_id
            .take()
            .unwrap_or_else(|| default_doc_id(documents.len()));
        documents.push(Document::from_tokens(
            id,
            tokens.as_slice(),
            std::mem::take(labels),
        ));
        tokens.clear();
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut pending_id, &mut tokens, &mut labels, &mut documents);
            continue;
        }
        if let Some(id) = line.strip_prefix(ID_HEADER) {
            if !line.contains('\t') {
                if !tokens.is_empty() {
                    return Err(Error::parse(line_no, "document id header inside a document"));
                }
                pending_id = Some(id.trim().to_string());
                continue;
            }
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                line_no,
                format!("expected 2 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (token, label) = (cols[0], cols[1]);
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(Error::parse(line_no, format!("invalid token `{token}`")));
        }
        if !schema.contains(label) {
            return Err(Error::parse(line_no, format!("unknown label `{label}`")));
        }
        tokens.push(token.to_string());
        labels.push(label.to_string());
    }
    flush(&mut pending_id, &mut tokens, &mut labels, &mut documents);
    if pending_id.is_some() {
        return Err(Error::Validation("document id header without tokens".into()));
    }

    Ok(Dataset {
        schema: schema.clone(),
        documents,
    })
}

/// Inverse of [`parse_token_label_file`]. Documents whose id differs from
/// the positional default get an id header.
pub fn write_token_label_file(documents: &[Document]) -> String {
    let mut out = String::new();
    for (i, doc) in documents.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if doc.id != default_doc_id(i) {
            let _ = writeln!(out, "{ID_HEADER}{}", doc.id);
        }
        for (tok, label) in doc.tokens.iter().zip(&doc.token_labels) {
            let _ = writeln!(out, "{}\t{}", tok.text, label);
        }
    }
    out
}

/// Labels `n_tokens` tokens from non-overlapping spans; uncovered tokens get
/// the outside label.
pub fn spans_to_labels(n_tokens: usize, spans: &[Span], schema: &LabelSchema) -> Result<Vec<String>> {
    for s in spans {
        if s.token_start >= s.token_end || s.token_end > n_tokens {
            return Err(Error::Validation(format!(
                "span [{}, {}) out of range for {n_tokens} tokens",
                s.token_start, s.token_end
            )));
        }
        if !schema.is_category(&s.category) {
            return Err(Error::Schema(format!("unknown span category `{}`", s.category)));
        }
    }
    let mut order: Vec<&Span> = spans.iter().collect();
    order.sort_by_key(|s| (s.token_start, s.token_end));
    for pair in order.windows(2) {
        if pair[1].token_start < pair[0].token_end {
            return Err(Error::Validation(format!(
                "overlapping spans [{}, {}) {} and [{}, {}) {}",
                pair[0].token_start,
                pair[0].token_end,
                pair[0].category,
                pair[1].token_start,
                pair[1].token_end,
                pair[1].category
            )));
        }
    }
    let mut labels = vec![schema.outside_label().to_string(); n_tokens];
    for s in spans {
        for label in &mut labels[s.token_start..s.token_end] {
            label.clone_from(&s.category);
        }
    }
    Ok(labels)
}

/// Maximal runs of identical non-outside labels.
pub fn labels_to_spans<S: AsRef<str>>(doc_id: &str, labels: &[S], schema: &LabelSchema) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let label = labels[i].as_ref();
        let mut j = i + 1;
        while j < labels.len() && labels[j].as_ref() == label {
            j += 1;
        }
        if label != schema.outside_label() {
            spans.push(Span {
                doc_id: doc_id.to_string(),
                token_start: i,
                token_end: j,
                category: label.to_string(),
            });
        }
        i = j;
    }
    spans
}

/// Parses `doc_id<TAB>token_start<TAB>token_end<TAB>category` records.
pub fn parse_span_file(bytes: &[u8]) -> Result<Vec<Span>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "invalid UTF-8"))?;
    let mut spans = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad token index `{s}`")))
        };
        spans.push(Span {
            doc_id: cols[0].to_string(),
            token_start: index(cols[1])?,
            token_end: index(cols[2])?,
            category: cols[3].to_string(),
        });
    }
    Ok(spans)
}

pub fn write_span_file(spans: &[Span]) -> String {
    spans
        .iter()
        .map(|s| {
            format!(
                "{}\t{}\t{}\t{}\n",
                s.doc_id, s.token_start, s.token_end, s.category
            )
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_texts: usize,
    pub n_unique_words: usize,
    pub max_length: usize,
    pub label_dist: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn total_tokens(&self) -> usize {
        self.label_dist.values().sum()
    }
}

/// Unique words are counted case-sensitively over raw token strings.
pub fn dataset_stats(dataset: &Dataset) -> CorpusStats {
    let mut words = BTreeSet::new();
    let mut label_dist: BTreeMap<String, usize> = BTreeMap::new();
    let mut max_length = 0;
    for doc in &dataset.documents {
        max_length = max_length.max(doc.len());
        for (tok, label) in doc.tokens.iter().zip(&doc.token_labels) {
            words.insert(tok.text.as_str());
            *label_dist.entry(label.clone()).or_default() += 1;
        }
    }
    CorpusStats {
        n_texts: dataset.documents.len(),
        n_unique_words: words.len(),
        max_length,
        label_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new("O", ["CLA", "EXP", "PER", "QUE"]).unwrap()
    }

    fn labels(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_two_blocks() {
        let file = b"I\tO\nhave\tCLA\nIBS\tCLA\n\nIt\tO\nhelps\tQUE\n";
        let ds = parse_token_label_file(file, &schema()).unwrap();
        assert_eq!(ds.documents.len(), 2);
        assert_eq!(ds.documents[0].len(), 3);
        assert_eq!(ds.documents[1].len(), 2);
        assert_eq!(ds.documents[0].text, "I have IBS");
        assert_eq!(ds.documents[1].id, "doc1");
        ds.documents[0].validate(&ds.schema).unwrap();
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse_token_label_file(b"", &schema()).unwrap();
        assert!(ds.documents.is_empty());
        let ds = parse_token_label_file(b"\n\n", &schema()).unwrap();
        assert!(ds.documents.is_empty());
    }

    #[test]
    fn extra_column_is_parse_error_at_line() {
        let err = parse_token_label_file(b"I\tO\nhave\tCLA\textra\n", &schema()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let err = parse_token_label_file(b"I\tB-POP\n", &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn id_header_round_trips() {
        let file = "# id = post-17\nI\tO\nran\tO\n\nok\tQUE\n";
        let ds = parse_token_label_file(file.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.documents[0].id, "post-17");
        assert_eq!(ds.documents[1].id, "doc1");
        assert_eq!(write_token_label_file(&ds.documents), file);
    }

    #[test]
    fn spans_to_labels_basic() {
        let s = schema();
        let span = Span {
            doc_id: "d".into(),
            token_start: 1,
            token_end: 3,
            category: "CLA".into(),
        };
        assert_eq!(spans_to_labels(5, &[span], &s).unwrap(), labels("O CLA CLA O O"));
        assert_eq!(spans_to_labels(3, &[], &s).unwrap(), labels("O O O"));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let s = schema();
        let mk = |a, b| Span {
            doc_id: "d".into(),
            token_start: a,
            token_end: b,
            category: "CLA".into(),
        };
        let err = spans_to_labels(5, &[mk(0, 2), mk(1, 3)], &s).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[0, 2)") && msg.contains("[1, 3)"), "{msg}");
    }

    #[test]
    fn labels_to_spans_runs() {
        let s = schema();
        let spans = labels_to_spans("d", &labels("O CLA CLA O"), &s);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].token_start, spans[0].token_end), (1, 3));
        assert!(labels_to_spans("d", &labels("O O"), &s).is_empty());
        let spans = labels_to_spans("d", &labels("CLA QUE"), &s);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].category, "QUE");
    }

    #[test]
    fn round_trip_all_short_sequences() {
        let s = LabelSchema::new("O", ["CLA", "QUE"]).unwrap();
        let alphabet = ["O", "CLA", "QUE"];
        for len in 0..=4u32 {
            for code in 0..3usize.pow(len) {
                let mut c = code;
                let seq: Vec<String> = (0..len)
                    .map(|_| {
                        let l = alphabet[c % 3];
                        c /= 3;
                        l.to_string()
                    })
                    .collect();
                let spans = labels_to_spans("d", &seq, &s);
                assert_eq!(spans_to_labels(seq.len(), &spans, &s).unwrap(), seq);
            }
        }
    }

    #[test]
    fn span_file_round_trip() {
        let text = "d1\t0\t2\tCLA\nd2\t3\t4\tQUE\n";
        let spans = parse_span_file(text.as_bytes()).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!(write_span_file(&spans), text);
        assert!(parse_span_file(b"d1\t0\tCLA\n").is_err());
    }

    #[test]
    fn stats_small_doc() {
        let s = schema();
        let doc = Document::from_tokens("d", &["a", "b", "a"], labels("O CLA CLA"));
        let mut ds = Dataset::new(s.clone(), vec![doc]).unwrap();
        let st = dataset_stats(&ds);
        assert_eq!((st.n_texts, st.n_unique_words, st.max_length), (1, 2, 3));
        assert_eq!(st.total_tokens(), 3);

        ds.documents
            .push(Document::from_tokens::<&str>("e", &[], vec![]));
        let st2 = dataset_stats(&ds);
        assert_eq!(st2.n_texts, 2);
        assert_eq!(
            (st2.n_unique_words, st2.max_length, &st2.label_dist),
            (st.n_unique_words, st.max_length, &st.label_dist)
        );
    }

    #[test]
    fn schema_config_parse() {
        let cfg = "# subtask 1\noutside = O\ncategories = CLA, EXP, PER, QUE\nfreq.CLA = 8183\nfreq.O = 316676\n";
        let s = LabelSchema::parse_config(cfg).unwrap();
        assert_eq!(s.categories().len(), 4);
        assert_eq!(s.train_freq("CLA"), 8183);
        assert_eq!(s.train_freq("QUE"), 0);
        assert_eq!(LabelSchema::parse_config(&s.to_config()).unwrap(), s);
        assert!(LabelSchema::parse_config("outside = O\ncategories = O, CLA\n").is_err());
        assert!(LabelSchema::parse_config("outside = O\ncategories = CLA\nfreq.X = 3\n").is_err());
    }

    #[test]
    fn tokenizer_and_render() {
        let text = "80% of people diagnosed with IBS have Sibo.";
        let toks = tokenize_text(text);
        let words: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(
            words,
            ["80", "%", "of", "people", "diagnosed", "with", "IBS", "have", "Sibo", "."]
        );
        assert_eq!(render_tokens(&toks), text);
    }
}
