//! Text normalization, segmentation and stopword handling.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Invisible formatting code points removed by [`normalize_text`].
///
/// Soft hyphen, Arabic letter mark, Mongolian vowel separator, the
/// zero-width family, bidi embeddings/isolates, invisible operators and
/// the byte-order mark.
pub const STRIPPED_FORMAT_CHARS: &[(char, char)] = &[
    ('\u{00AD}', '\u{00AD}'),
    ('\u{061C}', '\u{061C}'),
    ('\u{180E}', '\u{180E}'),
    ('\u{200B}', '\u{200F}'),
    ('\u{202A}', '\u{202E}'),
    ('\u{2060}', '\u{2064}'),
    ('\u{2066}', '\u{206F}'),
    ('\u{FEFF}', '\u{FEFF}'),
];

fn is_stripped_format(c: char) -> bool {
    STRIPPED_FORMAT_CHARS
        .iter()
        .any(|&(lo, hi)| (lo..=hi).contains(&c))
}

/// NFC-normalizes `raw`, drops control and zero-width characters, and
/// collapses every whitespace run into a single ASCII space.
///
/// Idempotent: `normalize_text(&normalize_text(x)) == normalize_text(x)`.
pub fn normalize_text(raw: &str) -> String {
    // Strip before composing so that removing a zero-width character can
    // never expose a new composable pair on a second pass.
    let stripped: String = raw
        .chars()
        .filter(|&c| !is_stripped_format(c) && !(c.is_control() && !c.is_whitespace()))
        .collect();
    let composed: String = stripped.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split(char::is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Word segmentation contract.
///
/// Implementations must be deterministic and return an empty list for
/// empty input. Returned tokens must not contain whitespace, so that
/// joining them with single spaces and re-segmenting is lossless.
pub trait Segmenter: Send + Sync + fmt::Debug {
    fn segment(&self, text: &str) -> Vec<String>;
}

/// Splits on Unicode whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceSegmenter;

impl Segmenter for WhitespaceSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_owned).collect()
    }
}

/// Maps a surface token onto the term used for lexical matching and
/// hashing: lowercased, with leading/trailing punctuation removed.
pub fn term_key(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Stoplist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| term_key(&normalize_text(w.as_ref())))
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Reads a UTF-8 file with one stopword per line.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read stopword list {}: {e}", path.display()))
        })?;
        Ok(Self::new(raw.lines()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Drops stoplist members, keeping the surviving tokens in input order.
pub fn remove_stopwords(tokens: &[String], stoplist: &Stoplist) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(t))
        .cloned()
        .collect()
}

/// The text pipeline shared by ingestion and query processing.
///
/// Lexical terms are segmented, lowercased and stopword-filtered; dense
/// text keeps every segmented token.
#[derive(Debug, Clone)]
pub struct Analyzer {
    segmenter: Arc<dyn Segmenter>,
    stoplist: Stoplist,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::new(Arc::new(WhitespaceSegmenter), Stoplist::default())
    }
}

impl Analyzer {
    pub fn new(segmenter: Arc<dyn Segmenter>, stoplist: Stoplist) -> Self {
        Self {
            segmenter,
            stoplist,
        }
    }

    pub fn with_stoplist(stoplist: Stoplist) -> Self {
        Self::new(Arc::new(WhitespaceSegmenter), stoplist)
    }

    pub fn stoplist(&self) -> &Stoplist {
        &self.stoplist
    }

    /// Normalizes and segments raw text.
    pub fn tokens(&self, raw: &str) -> Vec<String> {
        self.segmenter.segment(&normalize_text(raw))
    }

    /// Segmenter output for already-normalized text.
    pub fn segment(&self, text: &str) -> Vec<String> {
        self.segmenter.segment(text)
    }

    pub fn lexical_terms(&self, tokens: &[String]) -> Vec<String> {
        let keyed: Vec<String> = tokens
            .iter()
            .map(|t| term_key(t))
            .filter(|t| !t.is_empty())
            .collect();
        remove_stopwords(&keyed, &self.stoplist)
    }

    /// Lexical query terms straight from raw text.
    pub fn query_terms(&self, raw: &str) -> Vec<String> {
        self.lexical_terms(&self.tokens(raw))
    }
}
