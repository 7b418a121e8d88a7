//! `claimaug` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or other failure, 2
//! missing/unreadable/malformed input (and usage errors), 3 augmentation
//! produced nothing, 4 training diverged.

mod commands;
pub mod config;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use claimaug::{Dataset, LabelSchema};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOTHING_PRODUCED: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_FAILURE, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }

    pub fn missing(path: &Path) -> Self {
        Self::input(format!("{}: no such file", path.display()))
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }

    /// Maps a library error, prefixing `context` (usually a path).
    pub fn from_core(context: Option<&Path>, e: claimaug::Error) -> Self {
        use claimaug::Error as E;
        let code = match &e {
            E::Parse { .. } | E::Io(_) | E::Json(_) => EXIT_INPUT,
            E::NothingProduced { .. } => EXIT_NOTHING_PRODUCED,
            E::Divergence { .. } => EXIT_DIVERGED,
            _ => EXIT_FAILURE,
        };
        match context {
            Some(p) => Self::new(code, format!("{}: {e}", p.display())),
            None => Self::new(code, e.to_string()),
        }
    }
}

impl From<claimaug::Error> for CliError {
    fn from(e: claimaug::Error) -> Self {
        Self::from_core(None, e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "claimaug", version, about = "Counterfactual augmentation and sentence-labeling bench")]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use the offline mock LLM client.
    #[arg(long, global = true)]
    pub offline: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics of a token-label file.
    Stats {
        file: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Also split into sentences and report label purity.
        #[arg(long)]
        sentences: bool,
    },
    /// Split documents into majority-labeled sentences.
    Split {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Write the verb pool, entity dictionary and lexicons for a training set.
    BuildLexicons {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Augment the minority class; writes `augmented.tsv` and `manifest.jsonl`.
    Augment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the CRF; writes `crf-model.json`.
    TrainCrf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the sentence classifier; writes `textclf-model.json`.
    TrainClf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a trained model on a labeled file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare metric reports; arguments are `NAME=report.json` or paths.
    Compare {
        #[arg(required = true)]
        reports: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic imbalanced corpus.
    MakeFixture {
        #[arg(long)]
        out_dir: PathBuf,
        /// Training sentences per class, e.g. `O=1983,CLA=40`.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        dev_sizes: Option<String>,
    },
    /// Train and score every configured run, then compare them.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses arguments, runs, prints errors to stderr, and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::config(e.to_string()))?;
            // the sink is not Send; buffer inside the pool and copy out
            let (res, buf) = pool.install(|| {
                let mut buf = Vec::new();
                (commands::dispatch(cli, &mut buf), buf)
            });
            out.write_all(&buf)
                .map_err(|e| CliError::new(EXIT_FAILURE, format!("stdout: {e}")))?;
            res
        }
        None => commands::dispatch(cli, out),
    }
}

pub(crate) fn default_schema() -> LabelSchema {
    LabelSchema::new("O", ["CLA", "EXP", "PER", "QUE"]).expect("static schema")
}

/// Explicit schema file, else `schema.cfg` beside the data, else the
/// default five-class schema.
pub(crate) fn load_schema(explicit: Option<&Path>, data: &Path) -> Result<LabelSchema, CliError> {
    let sibling = data.parent().map(|d| d.join("schema.cfg"));
    let path = match explicit {
        Some(p) if !p.is_file() => return Err(CliError::missing(p)),
        Some(p) => Some(p.to_path_buf()),
        None => sibling.filter(|p| p.is_file()),
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            LabelSchema::parse_config(&text).map_err(|e| CliError::from_core(Some(&p), e))
        }
        None => Ok(default_schema()),
    }
}

pub(crate) fn read_dataset(path: &Path, schema: &LabelSchema) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(CliError::missing(path));
    }
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    claimaug::corpus::parse_token_label_file(&bytes, schema).map_err(|e| {
        // an unknown label is malformed input here, not a bad config
        let bad_label = matches!(e, claimaug::Error::Schema(_));
        let mut err = CliError::from_core(Some(path), e);
        if bad_label {
            err.code = EXIT_INPUT;
        }
        err
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
