//! File formats shared by the command-line tool: arc tables, assignment and
//! label tables, and atomic writes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arcshape::{ArcLabel, ArcShape};
use crate::sentiment::{ArcPoint, SentimentArc};

pub const NO_SIGNAL: &str = "NA";
pub const ARC_CSV_SUFFIX: &str = ".arc.csv";
pub const ARC_JSON_SUFFIX: &str = ".arc.json";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    if source.kind() == std::io::ErrorKind::NotFound {
        FormatError::NotFound(path.to_path_buf())
    } else {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_atomic_path(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    write_atomic(path, bytes).map_err(|e| io_err(path, e))
}

/// Run metadata stored next to each arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcMeta {
    pub dimension: String,
    pub window_size: usize,
    pub context: usize,
    pub discarded_words: usize,
}

pub fn arc_to_csv(arc: &SentimentArc) -> String {
    let mut out = String::from("doc_id,segment_index,score,coverage\n");
    for p in &arc.points {
        let score = p
            .score
            .map_or_else(|| NO_SIGNAL.to_string(), |s| s.to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&arc.doc),
            p.segment_index,
            score,
            p.coverage
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct ArcJson {
    doc_id: String,
    #[serde(flatten)]
    meta: ArcMeta,
    points: Vec<ArcPoint>,
}

pub fn arc_to_json(arc: &SentimentArc, meta: &ArcMeta) -> String {
    let doc = ArcJson {
        doc_id: arc.doc.clone(),
        meta: meta.clone(),
        points: arc.points.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("arc serializes")
}

pub fn arc_from_json(text: &str) -> Result<(SentimentArc, ArcMeta), String> {
    let doc: ArcJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok((
        SentimentArc {
            doc: doc.doc_id,
            points: doc.points,
            context: doc.meta.context,
        },
        doc.meta,
    ))
}

/// Parses an arc table. Rows may belong to several documents; arcs are
/// returned in order of first appearance. The context is not stored in the
/// table and is reported as 0.
pub fn arcs_from_csv(text: &str) -> Result<Vec<SentimentArc>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column `{name}`"))
    };
    let (c_doc, c_idx, c_score) = (col("doc_id")?, col("segment_index")?, col("score")?);
    let c_cov = headers.iter().position(|h| h == "coverage");
    let mut order: Vec<String> = Vec::new();
    let mut arcs: BTreeMap<String, Vec<ArcPoint>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = i + 2;
        let get = |c: usize| {
            rec.get(c)
                .ok_or_else(|| format!("line {row}: missing field"))
        };
        let doc = get(c_doc)?.to_string();
        let segment_index = get(c_idx)?
            .parse::<usize>()
            .map_err(|_| format!("line {row}: bad segment_index"))?;
        let raw = get(c_score)?;
        let score = if raw == NO_SIGNAL || raw.is_empty() {
            None
        } else {
            Some(
                raw.parse::<f64>()
                    .map_err(|_| format!("line {row}: bad score `{raw}`"))?,
            )
        };
        let coverage = match c_cov {
            Some(c) => get(c)?
                .parse::<f64>()
                .map_err(|_| format!("line {row}: bad coverage"))?,
            None => f64::NAN,
        };
        if !arcs.contains_key(&doc) {
            order.push(doc.clone());
        }
        arcs.entry(doc).or_default().push(ArcPoint {
            segment_index,
            score,
            coverage,
        });
    }
    Ok(order
        .into_iter()
        .map(|doc| {
            let mut points = arcs.remove(&doc).unwrap_or_default();
            points.sort_by_key(|p| p.segment_index);
            SentimentArc {
                doc,
                points,
                context: 0,
            }
        })
        .collect())
}

pub fn read_arc_file(path: &Path) -> Result<Vec<SentimentArc>, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse = |msg: String| FormatError::Parse {
        path: path.to_path_buf(),
        msg,
    };
    if path.extension().is_some_and(|e| e == "json") {
        arc_from_json(&text).map(|(a, _)| vec![a]).map_err(parse)
    } else {
        arcs_from_csv(&text).map_err(parse)
    }
}

/// Loads every `*.arc.csv` file in `dir` (sorted by file name). Falls back to
/// `*.arc.json` when no CSV arcs are present.
pub fn read_arc_dir(dir: &Path) -> Result<Vec<SentimentArc>, FormatError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let pick = |suffix: &str| -> Vec<PathBuf> {
        files
            .iter()
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(suffix))
            })
            .cloned()
            .collect()
    };
    let mut chosen = pick(ARC_CSV_SUFFIX);
    if chosen.is_empty() {
        chosen = pick(ARC_JSON_SUFFIX);
    }
    let mut arcs = Vec::new();
    for f in chosen {
        arcs.extend(read_arc_file(&f)?);
    }
    Ok(arcs)
}

pub fn assignments_to_csv<S: AsRef<str>>(docs: &[S], labels: &[usize]) -> String {
    let mut out = String::from("doc_id,cluster_id\n");
    for (d, l) in docs.iter().zip(labels) {
        out.push_str(&format!("{},{}\n", csv_field(d.as_ref()), l));
    }
    out
}

pub fn labels_to_csv(rows: &[(String, ArcLabel)]) -> String {
    let mut out = String::from("doc_id,label");
    for s in ArcShape::ALL {
        out.push_str(&format!(",d_{}", s.name()));
    }
    out.push('\n');
    for (doc, label) in rows {
        out.push_str(&format!("{},{}", csv_field(doc), label.label));
        for d in label.distances {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
    }
    out
}

/// File-system-safe stem for a document id.
pub fn file_stem_for(doc: &str) -> String {
    let s: String = doc
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("doc{s}")
    } else {
        s
    }
}
