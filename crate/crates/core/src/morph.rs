//! Verb lexicon, tense detection and tense-preserving conjugation.
//!
//! Verb detection is a lexicon lookup: a surface form is a verb when it
//! appears in the reverse index. Homographs ("claims") are accepted as verbs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_VERBS: &str = include_str!("../data/verbs.tsv");
const BUNDLED_STOPLIST: &str = include_str!("../data/stoplist.txt");
const BUNDLED_ANTONYMS: &str = include_str!("../data/antonyms.tsv");

/// Verbs whose final consonant doubles before -ed / -ing.
const DOUBLING: &[&str] = &[
    "admit", "ban", "bar", "beg", "chat", "chop", "clap", "commit", "compel", "confer", "control",
    "defer", "deter", "dip", "drag", "drip", "drop", "drum", "emit", "equip", "expel", "fit",
    "flip", "grab", "grin", "hop", "hug", "hum", "incur", "infer", "jam", "jog", "knit", "nag",
    "nod", "occur", "omit", "pat", "permit", "pin", "plan", "plot", "plug", "pop", "prefer",
    "program", "propel", "rebel", "recur", "refer", "regret", "rip", "rob", "rot", "rub", "scan",
    "scrub", "ship", "shrug", "sip", "skip", "slam", "slap", "slip", "snap", "sob", "spot", "star",
    "step", "stir", "stop", "strip", "submit", "swap", "tag", "tap", "transfer", "transmit",
    "trap", "trim", "tug", "wrap", "zip",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tense {
    Base,
    Present3sg,
    Past,
    Gerund,
    PastParticiple,
}

impl Tense {
    pub const ALL: [Tense; 5] = [
        Tense::Base,
        Tense::Present3sg,
        Tense::Past,
        Tense::Gerund,
        Tense::PastParticiple,
    ];

    /// Lower is preferred when a surface form is ambiguous.
    fn priority(self) -> u8 {
        match self {
            Tense::Past => 0,
            Tense::Present3sg => 1,
            Tense::Gerund => 2,
            Tense::PastParticiple => 3,
            Tense::Base => 4,
        }
    }
}

impl fmt::Display for Tense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tense::Base => "base",
            Tense::Present3sg => "3sg",
            Tense::Past => "past",
            Tense::Gerund => "gerund",
            Tense::PastParticiple => "past_participle",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbForms {
    pub base: String,
    pub present3sg: String,
    pub past: String,
    pub gerund: String,
    pub past_participle: String,
}

impl VerbForms {
    pub fn get(&self, tense: Tense) -> &str {
        match tense {
            Tense::Base => &self.base,
            Tense::Present3sg => &self.present3sg,
            Tense::Past => &self.past,
            Tense::Gerund => &self.gerund,
            Tense::PastParticiple => &self.past_participle,
        }
    }

    /// Forms produced by the regular morphology rules.
    pub fn regular(base: &str) -> Self {
        VerbForms {
            base: base.to_string(),
            present3sg: regular_3sg(base),
            past: regular_past(base),
            gerund: regular_gerund(base),
            past_participle: regular_past(base),
        }
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn ends_consonant_y(base: &str) -> bool {
    let b = base.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b'y' && !is_vowel(b[b.len() - 2])
}

fn doubles(base: &str) -> bool {
    DOUBLING.binary_search(&base).is_ok()
}

fn regular_3sg(base: &str) -> String {
    if ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| base.ends_with(s)) {
        format!("{base}es")
    } else if ends_consonant_y(base) {
        format!("{}ies", &base[..base.len() - 1])
    } else {
        format!("{base}s")
    }
}

fn regular_past(base: &str) -> String {
    if doubles(base) {
        format!("{base}{}ed", &base[base.len() - 1..])
    } else if base.ends_with('e') {
        format!("{base}d")
    } else if ends_consonant_y(base) {
        format!("{}ied", &base[..base.len() - 1])
    } else if base.ends_with('c') {
        format!("{base}ked")
    } else {
        format!("{base}ed")
    }
}

fn regular_gerund(base: &str) -> String {
    if doubles(base) {
        format!("{base}{}ing", &base[base.len() - 1..])
    } else if let Some(stem) = base.strip_suffix("ie") {
        format!("{stem}ying")
    } else if base.ends_with("ee") || base.ends_with("ye") || base.ends_with("oe") {
        format!("{base}ing")
    } else if base.ends_with('e') && base.len() > 1 {
        format!("{}ing", &base[..base.len() - 1])
    } else if base.ends_with('c') {
        format!("{base}king")
    } else {
        format!("{base}ing")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbMatch {
    pub base: String,
    pub tense: Tense,
}

#[derive(Clone, Debug, Default)]
pub struct VerbLexicon {
    entries: BTreeMap<String, VerbForms>,
    reverse: HashMap<String, Vec<(String, Tense)>>,
    stoplist: BTreeSet<String>,
}

impl VerbLexicon {
    /// Parses the 5-column TSV: `base 3sg past gerund past_participle`,
    /// where `-` requests the regular form.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "invalid UTF-8"))?;
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 5 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(line_no, "expected 5 tab-separated columns"));
            }
            let base = cols[0].to_lowercase();
            if base == "-" || !base.chars().all(|c| c.is_alphabetic() || c == '-') {
                return Err(Error::parse(line_no, format!("invalid base `{}`", cols[0])));
            }
            let rule = VerbForms::regular(&base);
            let pick = |col: &str, tense| {
                if col == "-" {
                    rule.get(tense).to_string()
                } else {
                    col.to_lowercase()
                }
            };
            let forms = VerbForms {
                present3sg: pick(cols[1], Tense::Present3sg),
                past: pick(cols[2], Tense::Past),
                gerund: pick(cols[3], Tense::Gerund),
                past_participle: pick(cols[4], Tense::PastParticiple),
                base: base.clone(),
            };
            if entries.insert(base.clone(), forms).is_some() {
                return Err(Error::parse(line_no, format!("duplicate base `{base}`")));
            }
        }
        Ok(Self::from_entries(entries))
    }

    fn from_entries(entries: BTreeMap<String, VerbForms>) -> Self {
        let mut reverse: HashMap<String, Vec<(String, Tense)>> = HashMap::new();
        for (base, forms) in &entries {
            for tense in Tense::ALL {
                let cands = reverse.entry(forms.get(tense).to_string()).or_default();
                if !cands.iter().any(|(b, t)| b == base && *t == tense) {
                    cands.push((base.clone(), tense));
                }
            }
        }
        for cands in reverse.values_mut() {
            cands.sort_by(|a, b| (a.1.priority(), &a.0).cmp(&(b.1.priority(), &b.0)));
        }
        VerbLexicon {
            entries,
            reverse,
            stoplist: BTreeSet::new(),
        }
    }

    /// The bundled lexicon with the bundled auxiliary/copula stoplist.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_VERBS.as_bytes())
            .expect("bundled lexicon parses")
            .with_stoplist(BUNDLED_STOPLIST)
    }

    /// Adds stoplisted forms (one per line). A listed base form also stops
    /// every inflection of that base.
    pub fn with_stoplist(mut self, text: &str) -> Self {
        self.stoplist.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase),
        );
        self
    }

    pub fn stoplist(&self) -> &BTreeSet<String> {
        &self.stoplist
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, base: &str) -> bool {
        self.entries.contains_key(base)
    }

    pub fn forms(&self, base: &str) -> Option<&VerbForms> {
        self.entries.get(base)
    }

    pub fn bases(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Bases that may be chosen as replacement targets.
    pub fn replaceable_bases(&self) -> impl Iterator<Item = &str> {
        self.bases().filter(|b| !self.stoplist.contains(*b))
    }

    /// All (base, tense) readings of a surface form, preferred first.
    pub fn readings(&self, surface: &str) -> &[(String, Tense)] {
        self.reverse
            .get(&surface.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn detect(&self, token: &str) -> Option<VerbMatch> {
        let surface = token.to_lowercase();
        if self.stoplist.contains(&surface) {
            return None;
        }
        self.reverse
            .get(&surface)?
            .iter()
            .find(|(base, _)| !self.stoplist.contains(base))
            .map(|(base, tense)| VerbMatch {
                base: base.clone(),
                tense: *tense,
            })
    }

    pub fn conjugate(&self, base: &str, tense: Tense) -> Result<&str> {
        self.entries
            .get(base)
            .map(|f| f.get(tense))
            .ok_or_else(|| Error::UnknownVerb(base.to_string()))
    }

    /// A lexicon restricted to `bases`, keeping the stoplist.
    pub fn subset<'a>(&self, bases: impl IntoIterator<Item = &'a str>) -> Self {
        let entries = bases
            .into_iter()
            .filter_map(|b| self.entries.get(b).map(|f| (b.to_string(), f.clone())))
            .collect();
        let mut lex = Self::from_entries(entries);
        lex.stoplist = self.stoplist.clone();
        lex
    }

    /// Serializes in the TSV format, writing `-` where a form equals the
    /// regular rule.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for forms in self.entries.values() {
            let rule = VerbForms::regular(&forms.base);
            let _ = write!(out, "{}", forms.base);
            for tense in &Tense::ALL[1..] {
                let f = forms.get(*tense);
                let col = if f == rule.get(*tense) { "-" } else { f };
                let _ = write!(out, "\t{col}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn detect_verb(token: &str, lexicon: &VerbLexicon) -> Option<VerbMatch> {
    lexicon.detect(token)
}

pub fn conjugate<'a>(base: &str, tense: Tense, lexicon: &'a VerbLexicon) -> Result<&'a str> {
    lexicon.conjugate(base, tense)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl AntonymLexicon {
    /// Parses `base<TAB>antonym1,antonym2,...` rows.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "invalid UTF-8"))?;
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (base, ants) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(line_no, "expected `base<TAB>antonyms`"))?;
            let base = base.trim();
            if base.is_empty() || base != base.to_lowercase() {
                return Err(Error::parse(line_no, format!("key `{base}` must be a lowercase base form")));
            }
            let list = entries.entry(base.to_string()).or_default();
            for a in ants.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                if a == base {
                    return Err(Error::parse(line_no, format!("`{base}` listed as its own antonym")));
                }
                if !list.iter().any(|x| x == a) {
                    list.push(a.to_lowercase());
                }
            }
            if list.is_empty() {
                return Err(Error::parse(line_no, "empty antonym list"));
            }
        }
        Ok(AntonymLexicon { entries })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_ANTONYMS.as_bytes()).expect("bundled antonyms parse")
    }

    pub fn antonyms(&self, base: &str) -> &[String] {
        self.entries.get(base).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}
