//! Tokenization, fixed-size segmentation and per-segment word counts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::lexicon::Lexicon;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("vector for document `{found}` cannot be stacked into document `{expected}`")]
    MixedDocuments { expected: String, found: String },
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
}

/// Lowercases a single character using the simple (one-to-one) case
/// mapping. Characters whose lowercase form expands to several code points
/// are kept as-is.
fn fold_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn normalize_word(word: &str) -> String {
    word.chars().map(fold_char).collect()
}

/// Maximal runs of letters, lowercased, in document order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphabetic() {
            current.push(fold_char(c));
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    pub source_id: String,
    pub words: Vec<String>,
}

impl WordList {
    pub fn from_text(source_id: impl Into<String>, text: &str) -> Self {
        WordList {
            source_id: source_id.into(),
            words: tokenize(text),
        }
    }

    /// Reads a file, replacing invalid UTF-8 sequences before tokenizing.
    pub fn from_file(source_id: impl Into<String>, path: &Path) -> Result<Self, CorpusError> {
        let text = read_text_lossy(path)?;
        Ok(Self::from_text(source_id, &text))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn read_text_lossy(path: &Path) -> Result<String, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::NotFound(path.to_path_buf())
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment<'a> {
    pub doc: &'a str,
    pub index: usize,
    pub words: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation<'a> {
    pub segments: Vec<Segment<'a>>,
    /// Length of the trailing remainder that did not fill a window.
    pub discarded: usize,
}

/// Cuts the word list into consecutive, non-overlapping windows of exactly
/// `window_size` words. A shorter tail is dropped.
pub fn segment(words: &WordList, window_size: usize) -> Result<Segmentation<'_>, CorpusError> {
    if window_size == 0 {
        return Err(CorpusError::ZeroWindow);
    }
    let chunks = words.words.chunks_exact(window_size);
    let discarded = chunks.remainder().len();
    let segments = chunks
        .enumerate()
        .map(|(index, w)| Segment {
            doc: &words.source_id,
            index,
            words: w,
        })
        .collect();
    Ok(Segmentation {
        segments,
        discarded,
    })
}

/// Sparse counts of lexicon words, keyed by vocabulary position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreqVector {
    pub doc: String,
    pub counts: BTreeMap<usize, u64>,
    pub total_in_vocab: u64,
    /// Number of tokens in the segment, including out-of-vocabulary ones.
    pub n_words: u64,
}

impl FreqVector {
    /// Builds a vector from (position, count) pairs; zero counts are dropped
    /// and repeated positions add up. `n_words` is set to the in-vocabulary
    /// total.
    pub fn from_counts<I>(doc: impl Into<String>, counts: I) -> Self
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        let mut v = FreqVector {
            doc: doc.into(),
            ..Default::default()
        };
        for (pos, c) in counts {
            if c > 0 {
                *v.counts.entry(pos).or_insert(0) += c;
                v.total_in_vocab += c;
            }
        }
        v.n_words = v.total_in_vocab;
        v
    }

    /// Share of the segment's tokens found in the lexicon. Empty segments
    /// report 0.
    pub fn coverage(&self) -> f64 {
        if self.n_words == 0 {
            0.0
        } else {
            self.total_in_vocab as f64 / self.n_words as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn add(&mut self, other: &FreqVector) {
        for (&pos, &c) in &other.counts {
            *self.counts.entry(pos).or_insert(0) += c;
        }
        self.total_in_vocab += other.total_in_vocab;
        self.n_words += other.n_words;
    }

    /// Removes counts previously added with [`FreqVector::add`].
    ///
    /// Panics if `other` holds counts that are not present in `self`.
    pub fn subtract(&mut self, other: &FreqVector) {
        for (&pos, &c) in &other.counts {
            let slot = self
                .counts
                .get_mut(&pos)
                .expect("subtracting a count that was never added");
            *slot = slot.checked_sub(c).expect("count underflow");
            if *slot == 0 {
                self.counts.remove(&pos);
            }
        }
        self.total_in_vocab -= other.total_in_vocab;
        self.n_words -= other.n_words;
    }
}

pub fn frequency_vector(seg: &Segment<'_>, lex: &Lexicon) -> FreqVector {
    let mut v = FreqVector {
        doc: seg.doc.to_string(),
        n_words: seg.words.len() as u64,
        ..Default::default()
    };
    for w in seg.words {
        if let Some(pos) = lex.position(w) {
            *v.counts.entry(pos).or_insert(0) += 1;
            v.total_in_vocab += 1;
        }
    }
    v
}

/// Per-segment counts for one document, in segment order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMatrix {
    pub doc: String,
    pub rows: Vec<FreqVector>,
    pub window_size: usize,
}

impl SegmentMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn stack(
    doc: &str,
    vectors: Vec<FreqVector>,
    window_size: usize,
) -> Result<SegmentMatrix, CorpusError> {
    if let Some(v) = vectors.iter().find(|v| v.doc != doc) {
        return Err(CorpusError::MixedDocuments {
            expected: doc.to_string(),
            found: v.doc.clone(),
        });
    }
    Ok(SegmentMatrix {
        doc: doc.to_string(),
        rows: vectors,
        window_size,
    })
}

/// Tokenize, segment and count in one pass. Returns the matrix together
/// with the number of discarded trailing words.
pub fn build_matrix(
    words: &WordList,
    lex: &Lexicon,
    window_size: usize,
) -> Result<(SegmentMatrix, usize), CorpusError> {
    let seg = segment(words, window_size)?;
    let rows = seg
        .segments
        .iter()
        .map(|s| frequency_vector(s, lex))
        .collect();
    Ok((stack(&words.source_id, rows, window_size)?, seg.discarded))
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub title: String,
    pub path: PathBuf,
}

/// Reads a corpus manifest with a `doc_id, title, path` header. Relative
/// paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = read_text_lossy(path)?;
    let delim = if text.lines().next().is_some_and(|l| l.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<ManifestEntry>() {
        let mut entry = row.map_err(|e| CorpusError::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        out.push(entry);
    }
    Ok(out)
}
