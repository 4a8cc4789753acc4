//! Word-level affect lexicon (valence, arousal, dominance).
//!
//! The default on-disk layout is a delimiter-separated table with the
//! columns `Word, Ranking, Arousal, Valence, Dominance`. Raw NRC-VAD exports
//! (`word, valence, arousal, dominance`, no rank column) load through
//! [`ColumnMap::nrc_vad`]. Lines that are empty or start with `#` are
//! skipped. The delimiter is a tab if the first content line contains one,
//! otherwise a comma.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_word;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no entries in lexicon")]
    Empty,
    #[error("lexicon column `{0}` not found in header")]
    MissingColumn(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: {column} score {value} for `{word}` is outside [0, 1]")]
    OutOfRange {
        line: usize,
        word: String,
        column: Dimension,
        value: f64,
    },
    #[error("line {line}: duplicate word `{word}` (first seen on line {first_line})")]
    DuplicateWord {
        line: usize,
        word: String,
        first_line: usize,
    },
    #[error("line {line}: duplicate rank {rank}")]
    DuplicateRank { line: usize, rank: u64 },
    #[error("band_delta must be a finite value >= 0, got {0}")]
    InvalidBand(f64),
}

/// One of the three affect dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Valence,
    #[default]
    Arousal,
    Dominance,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Valence, Dimension::Arousal, Dimension::Dominance];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valence" | "v" => Ok(Dimension::Valence),
            "arousal" | "a" => Ok(Dimension::Arousal),
            "dominance" | "d" => Ok(Dimension::Dominance),
            other => Err(format!(
                "unknown dimension `{other}` (expected valence, arousal or dominance)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub rank: u64,
    pub arousal: f64,
    pub valence: f64,
    pub dominance: f64,
}

impl LexiconEntry {
    pub fn score(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
        }
    }
}

/// Reference to a column, either by header name (case-insensitive) or by
/// 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    Present,
    Absent,
    /// Treat the first content line as a header when its score columns do
    /// not parse as numbers.
    #[default]
    Auto,
}

/// Maps file columns onto lexicon roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub header: HeaderMode,
    pub word: ColumnRef,
    /// Without a rank column, ranks follow file order starting at 1.
    #[serde(default)]
    pub rank: Option<ColumnRef>,
    pub arousal: ColumnRef,
    pub valence: ColumnRef,
    pub dominance: ColumnRef,
}

impl ColumnMap {
    /// `Word, Ranking, Arousal, Valence, Dominance`.
    pub fn table() -> Self {
        ColumnMap {
            header: HeaderMode::Auto,
            word: ColumnRef::Index(0),
            rank: Some(ColumnRef::Index(1)),
            arousal: ColumnRef::Index(2),
            valence: ColumnRef::Index(3),
            dominance: ColumnRef::Index(4),
        }
    }

    /// `word, valence, arousal, dominance` as distributed upstream.
    pub fn nrc_vad() -> Self {
        ColumnMap {
            header: HeaderMode::Auto,
            word: ColumnRef::Index(0),
            rank: None,
            arousal: ColumnRef::Index(2),
            valence: ColumnRef::Index(1),
            dominance: ColumnRef::Index(3),
        }
    }
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap::table()
    }
}

/// Validated lexicon, ordered by ascending rank. Vocabulary positions are
/// indices into `entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    /// Builds a lexicon from in-memory entries, applying the same checks as
    /// [`load_lexicon`]. Line numbers in errors are 1-based entry positions.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut checked = Vec::with_capacity(entries.len());
        for (i, mut e) in entries.into_iter().enumerate() {
            let line = i + 1;
            e.word = validate_word(&e.word, line)?;
            for dim in Dimension::ALL {
                check_range(e.score(dim), dim, &e.word, line)?;
            }
            checked.push((line, e));
        }
        Self::assemble(checked)
    }

    fn assemble(mut rows: Vec<(usize, LexiconEntry)>) -> Result<Self, LexiconError> {
        if rows.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut first_seen: HashMap<String, usize> = HashMap::with_capacity(rows.len());
        let mut ranks: HashMap<u64, usize> = HashMap::with_capacity(rows.len());
        for (line, e) in &rows {
            if let Some(&first_line) = first_seen.get(&e.word) {
                return Err(LexiconError::DuplicateWord {
                    line: *line,
                    word: e.word.clone(),
                    first_line,
                });
            }
            first_seen.insert(e.word.clone(), *line);
            if ranks.insert(e.rank, *line).is_some() {
                return Err(LexiconError::DuplicateRank {
                    line: *line,
                    rank: e.rank,
                });
            }
        }
        rows.sort_by_key(|(_, e)| e.rank);
        let entries: Vec<LexiconEntry> = rows.into_iter().map(|(_, e)| e).collect();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Ok(Lexicon { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Vocabulary position of `word`. The lookup is case-insensitive.
    pub fn position(&self, word: &str) -> Option<usize> {
        match self.index.get(word) {
            Some(&p) => Some(p),
            None => self.index.get(&normalize_word(word)).copied(),
        }
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.position(word).map(|p| &self.entries[p])
    }

    /// Writes the lexicon in the default table layout with a header row.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "Word,Ranking,Arousal,Valence,Dominance")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.word, e.rank, e.arousal, e.valence, e.dominance
            )?;
        }
        Ok(())
    }
}

fn validate_word(raw: &str, line: usize) -> Result<String, LexiconError> {
    let word = normalize_word(raw.trim());
    if word.is_empty() || !word.chars().all(char::is_alphabetic) {
        return Err(LexiconError::Malformed {
            line,
            msg: format!(
                "word `{}` must be non-empty and contain only letters",
                raw.trim()
            ),
        });
    }
    Ok(word)
}

fn check_range(value: f64, column: Dimension, word: &str, line: usize) -> Result<(), LexiconError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(LexiconError::OutOfRange {
            line,
            word: word.to_string(),
            column,
            value,
        });
    }
    Ok(())
}

/// Loads a lexicon with the default table layout.
pub fn load_lexicon_default(path: &Path) -> Result<Lexicon, LexiconError> {
    load_lexicon(path, &ColumnMap::table())
}

pub fn load_lexicon(path: &Path, columns: &ColumnMap) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            LexiconError::NotFound(path.to_path_buf())
        } else {
            LexiconError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    parse_lexicon(&text, columns)
}

struct Resolved {
    word: usize,
    rank: Option<usize>,
    arousal: usize,
    valence: usize,
    dominance: usize,
}

impl Resolved {
    fn arity(&self) -> usize {
        [self.word, self.arousal, self.valence, self.dominance]
            .into_iter()
            .chain(self.rank)
            .max()
            .unwrap_or(0)
            + 1
    }
}

fn resolve(col: &ColumnRef, header: Option<&[String]>) -> Result<usize, LexiconError> {
    match col {
        ColumnRef::Index(i) => Ok(*i),
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.eq_ignore_ascii_case(name.trim())))
            .ok_or_else(|| LexiconError::MissingColumn(name.clone())),
    }
}

/// Parses lexicon text. Errors carry 1-based line numbers of `text`.
pub fn parse_lexicon(text: &str, columns: &ColumnMap) -> Result<Lexicon, LexiconError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            (
                i + 1,
                l.trim_start_matches('\u{feff}').trim_end_matches('\r'),
            )
        })
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .peekable();

    let Some(&(_, first)) = lines.peek() else {
        return Err(LexiconError::Empty);
    };
    let delim = if first.contains('\t') { '\t' } else { ',' };
    let split = |l: &str| -> Vec<String> { l.split(delim).map(|f| f.trim().to_string()).collect() };

    let first_fields = split(first);
    let has_header = match columns.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => looks_like_header(&first_fields, columns),
    };
    let header = if has_header {
        lines.next();
        Some(first_fields)
    } else {
        None
    };
    let cols = Resolved {
        word: resolve(&columns.word, header.as_deref())?,
        rank: columns
            .rank
            .as_ref()
            .map(|r| resolve(r, header.as_deref()))
            .transpose()?,
        arousal: resolve(&columns.arousal, header.as_deref())?,
        valence: resolve(&columns.valence, header.as_deref())?,
        dominance: resolve(&columns.dominance, header.as_deref())?,
    };
    let arity = cols.arity();

    let mut rows = Vec::new();
    for (ordinal, (line, raw)) in lines.enumerate() {
        let fields = split(raw);
        if fields.len() < arity {
            return Err(LexiconError::Malformed {
                line,
                msg: format!("expected at least {arity} fields, found {}", fields.len()),
            });
        }
        let word = validate_word(&fields[cols.word], line)?;
        let rank = match cols.rank {
            Some(c) => fields[c]
                .parse::<u64>()
                .ok()
                .filter(|&r| r > 0)
                .ok_or_else(|| LexiconError::Malformed {
                    line,
                    msg: format!("rank `{}` is not a positive integer", fields[c]),
                })?,
            None => ordinal as u64 + 1,
        };
        let score = |dim: Dimension, c: usize| -> Result<f64, LexiconError> {
            let v = fields[c]
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| LexiconError::Malformed {
                    line,
                    msg: format!("{dim} score `{}` is not a number", fields[c]),
                })?;
            check_range(v, dim, &word, line)?;
            Ok(v)
        };
        let arousal = score(Dimension::Arousal, cols.arousal)?;
        let valence = score(Dimension::Valence, cols.valence)?;
        let dominance = score(Dimension::Dominance, cols.dominance)?;
        rows.push((
            line,
            LexiconEntry {
                word,
                rank,
                arousal,
                valence,
                dominance,
            },
        ));
    }
    Lexicon::assemble(rows)
}

fn looks_like_header(fields: &[String], columns: &ColumnMap) -> bool {
    // A missing field is a malformed data row, not a header.
    let textual = |c: &ColumnRef| match c {
        ColumnRef::Index(i) => fields.get(*i).is_some_and(|f| f.parse::<f64>().is_err()),
        ColumnRef::Name(_) => true,
    };
    textual(&columns.arousal) || textual(&columns.valence) || textual(&columns.dominance)
}

/// Per-word scores on one dimension, aligned to vocabulary positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub dimension: Dimension,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn score_vector(lex: &Lexicon, dimension: Dimension) -> ScoreVector {
    ScoreVector {
        dimension,
        values: lex.entries.iter().map(|e| e.score(dimension)).collect(),
    }
}

/// Positions excluded from scoring: explicit stop words plus words whose
/// score sits strictly inside `0.5 ± band_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StopMask {
    pub excluded: Vec<bool>,
    pub band_delta: f64,
    pub explicit_list: BTreeSet<String>,
}

impl StopMask {
    /// A mask that excludes nothing.
    pub fn none(len: usize) -> Self {
        StopMask {
            excluded: vec![false; len],
            band_delta: 0.0,
            explicit_list: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.excluded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excluded.is_empty()
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&x| x).count()
    }
}

pub fn stop_mask<I, S>(
    lex: &Lexicon,
    dimension: Dimension,
    band_delta: f64,
    explicit_list: I,
) -> Result<StopMask, LexiconError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if !band_delta.is_finite() || band_delta < 0.0 {
        return Err(LexiconError::InvalidBand(band_delta));
    }
    let explicit_list: BTreeSet<String> = explicit_list
        .into_iter()
        .map(|w| normalize_word(w.as_ref().trim()))
        .filter(|w| !w.is_empty())
        .collect();
    let mut excluded: Vec<bool> = lex
        .entries
        .iter()
        .map(|e| (e.score(dimension) - 0.5).abs() < band_delta)
        .collect();
    for w in &explicit_list {
        match lex.position(w) {
            Some(p) => excluded[p] = true,
            None => debug!("stop word `{w}` is not in the lexicon; ignored"),
        }
    }
    Ok(StopMask {
        excluded,
        band_delta,
        explicit_list,
    })
}

/// Reads a stop list: one word per line, `#` comments and blank lines
/// ignored.
pub fn load_stop_list(path: &Path) -> Result<Vec<String>, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            LexiconError::NotFound(path.to_path_buf())
        } else {
            LexiconError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TABLE1: &str = "\
Word,Ranking,Arousal,Valence,Dominance
aaaaaaah,1,0.606,0.479,0.291
aaaah,2,0.636,0.520,0.282
aardvark,3,0.490,0.427,0.437
aback,4,0.407,0.385,0.288
abacus,5,0.276,0.510,0.485
zoo,20003,0.520,0.760,0.580
zoological,20004,0.458,0.667,0.492
zoology,20005,0.347,0.568,0.509
zoom,20006,0.520,0.490,0.462
zucchini,20007,0.321,0.510,0.250
";

    fn table1() -> Lexicon {
        parse_lexicon(TABLE1, &ColumnMap::table()).unwrap()
    }

    #[test]
    fn parses_row_with_spaces() {
        let lex = parse_lexicon("aardvark, 3, 0.490, 0.427, 0.437\n", &ColumnMap::table()).unwrap();
        let e = lex.get("aardvark").unwrap();
        assert_eq!(e.rank, 3);
        assert_eq!(e.arousal, 0.490);
        assert_eq!(e.valence, 0.427);
        assert_eq!(e.dominance, 0.437);
    }

    #[test]
    fn empty_input_is_rejected() {
        let err = parse_lexicon("", &ColumnMap::table()).unwrap_err();
        assert!(matches!(err, LexiconError::Empty));
        assert_eq!(err.to_string(), "no entries in lexicon");
        let err = parse_lexicon(
            "Word,Ranking,Arousal,Valence,Dominance\n",
            &ColumnMap::table(),
        )
        .unwrap_err();
        assert!(matches!(err, LexiconError::Empty));
    }

    #[test]
    fn duplicate_word_names_the_word() {
        let text = "zoo,1,0.5,0.5,0.5\nzebra,2,0.1,0.1,0.1\nZoo,3,0.5,0.5,0.5\n";
        let err = parse_lexicon(text, &ColumnMap::table()).unwrap_err();
        match &err {
            LexiconError::DuplicateWord {
                line,
                word,
                first_line,
            } => {
                assert_eq!((*line, word.as_str(), *first_line), (3, "zoo", 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("zoo"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "# comment\nWord,Ranking,Arousal,Valence,Dominance\nok,1,0.1,0.2,0.3\nbad,2,0.1,x,0.3\n";
        match parse_lexicon(text, &ColumnMap::table()).unwrap_err() {
            LexiconError::Malformed { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse_lexicon("a,1,0.1,0.2\n", &ColumnMap::table()).unwrap_err() {
            LexiconError::Malformed { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("fields"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_lexicon("a,1,0.1,0.2,0.3\nb,2,0.1,1.2,0.3\n", &ColumnMap::table()).unwrap_err()
        {
            LexiconError::OutOfRange { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, Dimension::Valence);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_lexicon("a,1,0.1,0.2,0.3\nb,1,0.1,0.2,0.3\n", &ColumnMap::table()).unwrap_err(),
            LexiconError::DuplicateRank { line: 2, rank: 1 }
        ));
        assert!(matches!(
            parse_lexicon("a1,1,0.1,0.2,0.3\n", &ColumnMap::table()).unwrap_err(),
            LexiconError::Malformed { line: 1, .. }
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_lexicon_default(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert!(matches!(err, LexiconError::NotFound(_)));
    }

    #[test]
    fn entries_sorted_by_rank() {
        let text = "b,2,0.1,0.2,0.3\na,1,0.4,0.5,0.6\n";
        let lex = parse_lexicon(text, &ColumnMap::table()).unwrap();
        assert_eq!(lex.entries()[0].word, "a");
        assert_eq!(lex.position("b"), Some(1));
    }

    #[test]
    fn nrc_vad_layout_and_tabs() {
        let text = "Word\tValence\tArousal\tDominance\nabandon\t0.052\t0.396\t0.223\nabba\t0.479\t0.606\t0.291\n";
        let lex = parse_lexicon(text, &ColumnMap::nrc_vad()).unwrap();
        let e = lex.get("abandon").unwrap();
        assert_eq!(
            (e.rank, e.valence, e.arousal, e.dominance),
            (1, 0.052, 0.396, 0.223)
        );
        assert_eq!(lex.get("abba").unwrap().rank, 2);
    }

    #[test]
    fn named_columns() {
        let map = ColumnMap {
            header: HeaderMode::Present,
            word: ColumnRef::Name("term".into()),
            rank: None,
            arousal: ColumnRef::Name("A".into()),
            valence: ColumnRef::Name("V".into()),
            dominance: ColumnRef::Name("D".into()),
        };
        let lex = parse_lexicon("D,V,term,A\n0.3,0.2,Hello,0.1\n", &map).unwrap();
        let e = lex.get("hello").unwrap();
        assert_eq!((e.arousal, e.valence, e.dominance), (0.1, 0.2, 0.3));
        let bad = ColumnMap {
            word: ColumnRef::Name("missing".into()),
            ..map
        };
        assert!(matches!(
            parse_lexicon("D,V,term,A\n0.3,0.2,x,0.1\n", &bad).unwrap_err(),
            LexiconError::MissingColumn(_)
        ));
    }

    #[test]
    fn score_vectors_from_table1() {
        let lex = table1();
        assert_eq!(score_vector(&lex, Dimension::Arousal).values[0], 0.606);
        let dom = score_vector(&lex, Dimension::Dominance);
        assert_eq!(*dom.values.last().unwrap(), 0.250);
        assert_eq!(Dimension::default(), Dimension::Arousal);

        let single = Lexicon::from_entries(vec![LexiconEntry {
            word: "solo".into(),
            rank: 1,
            arousal: 0.3,
            valence: 0.4,
            dominance: 0.5,
        }])
        .unwrap();
        assert_eq!(score_vector(&single, Dimension::Valence).values, vec![0.4]);
    }

    #[test]
    fn stop_mask_cases() {
        let lex = table1();
        let none = stop_mask(&lex, Dimension::Arousal, 0.0, Vec::<String>::new()).unwrap();
        assert!(none.excluded.iter().all(|&x| !x));

        let band = stop_mask(&lex, Dimension::Arousal, 0.02, Vec::<String>::new()).unwrap();
        assert!(band.excluded[lex.position("aardvark").unwrap()]);
        assert!(!band.excluded[lex.position("aaaaaaah").unwrap()]);

        let explicit = stop_mask(&lex, Dimension::Arousal, 0.0, ["zoo", "notaword"]).unwrap();
        let zoo = lex.position("zoo").unwrap();
        for (i, &x) in explicit.excluded.iter().enumerate() {
            assert_eq!(x, i == zoo);
        }

        assert!(matches!(
            stop_mask(&lex, Dimension::Arousal, -0.1, Vec::<String>::new()),
            Err(LexiconError::InvalidBand(_))
        ));
    }

    #[test]
    fn dimension_parsing() {
        assert_eq!("Valence".parse::<Dimension>().unwrap(), Dimension::Valence);
        assert!("joy".parse::<Dimension>().is_err());
    }
}
