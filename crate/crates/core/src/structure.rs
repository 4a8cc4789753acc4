//! Narrative-structure tagging with a multinomial bag-of-words model.
//!
//! Training counts words per category with additive smoothing; prediction
//! sums log-likelihoods of the words it has seen. Models persist as
//! versioned JSON.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::tokenize;

pub const DEFAULT_CATEGORIES: [&str; 4] = ["tension", "punishment", "reward", "victory"];
pub const MODEL_FORMAT: &str = "narrarc-structure-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("smoothing alpha must be > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("no categories declared")]
    NoCategories,
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("category coverage: no training examples for {0:?}")]
    CategoryCoverage(Vec<String>),
    #[error("label `{0}` is not a declared category")]
    UnknownLabel(String),
    #[error("model file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub label: String,
    pub text: String,
}

impl LabeledSegment {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        LabeledSegment {
            label: label.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureModel {
    categories: Vec<String>,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    log_priors: Vec<f64>,
    log_likelihoods: Vec<Vec<f64>>,
    alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructurePrediction {
    pub label: String,
    pub log_scores: Vec<f64>,
}

fn token_counts(text: &str) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for w in tokenize(text) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Trains a model over the declared `categories`, which fix the order of
/// scores and the tie-break. Every category needs at least one example.
pub fn train<S: AsRef<str>>(
    data: &[LabeledSegment],
    categories: &[S],
    alpha: f64,
) -> Result<StructureModel, StructureError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(StructureError::InvalidAlpha(alpha));
    }
    if categories.is_empty() {
        return Err(StructureError::NoCategories);
    }
    let categories: Vec<String> = categories.iter().map(|c| c.as_ref().to_string()).collect();
    let mut cat_index = HashMap::new();
    for (i, c) in categories.iter().enumerate() {
        if cat_index.insert(c.as_str(), i).is_some() {
            return Err(StructureError::DuplicateCategory(c.clone()));
        }
    }

    let mut docs = vec![0u64; categories.len()];
    let mut word_counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); categories.len()];
    let mut vocab = BTreeSet::new();
    for seg in data {
        let &c = cat_index
            .get(seg.label.as_str())
            .ok_or_else(|| StructureError::UnknownLabel(seg.label.clone()))?;
        docs[c] += 1;
        for (w, k) in token_counts(&seg.text) {
            *word_counts[c].entry(w.clone()).or_insert(0) += k;
            vocab.insert(w);
        }
    }
    let missing: Vec<String> = categories
        .iter()
        .zip(&docs)
        .filter(|(_, &d)| d == 0)
        .map(|(c, _)| c.clone())
        .collect();
    if !missing.is_empty() {
        return Err(StructureError::CategoryCoverage(missing));
    }

    let vocabulary: Vec<String> = vocab.into_iter().collect();
    let v = vocabulary.len() as f64;
    let n_docs: u64 = docs.iter().sum();
    let log_priors = docs
        .iter()
        .map(|&d| (d as f64 / n_docs as f64).ln())
        .collect();
    let log_likelihoods = word_counts
        .iter()
        .map(|counts| {
            let total: u64 = counts.values().sum();
            let denom = (total as f64 + alpha * v).ln();
            vocabulary
                .iter()
                .map(|w| (counts.get(w).copied().unwrap_or(0) as f64 + alpha).ln() - denom)
                .collect()
        })
        .collect();
    let index = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(StructureModel {
        categories,
        vocabulary,
        index,
        log_priors,
        log_likelihoods,
        alpha,
    })
}

impl StructureModel {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn log_likelihoods(&self) -> &[Vec<f64>] {
        &self.log_likelihoods
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn feature(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn predict(&self, text: &str) -> StructurePrediction {
        let mut log_scores = self.log_priors.clone();
        for (w, count) in token_counts(text) {
            let Some(f) = self.feature(&w) else { continue };
            for (score, ll) in log_scores.iter_mut().zip(&self.log_likelihoods) {
                *score += count as f64 * ll[f];
            }
        }
        let mut best = 0;
        for (i, s) in log_scores.iter().enumerate().skip(1) {
            if *s > log_scores[best] {
                best = i;
            }
        }
        StructurePrediction {
            label: self.categories[best].clone(),
            log_scores,
        }
    }

    fn fingerprint(categories: &[String]) -> String {
        let mut h = Sha256::new();
        for c in categories {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            categories: self.categories.clone(),
            category_fingerprint: Self::fingerprint(&self.categories),
            alpha: self.alpha,
            vocabulary: self.vocabulary.clone(),
            log_priors: self.log_priors.clone(),
            log_likelihoods: self.log_likelihoods.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| StructureError::Schema(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(StructureError::Schema(format!(
                "unexpected format `{}`",
                header.format
            )));
        }
        if header.version != MODEL_VERSION {
            return Err(StructureError::Version {
                found: header.version,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| StructureError::Schema(e.to_string()))?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<(), StructureError> {
        crate::io::write_atomic(path, self.to_json().as_bytes()).map_err(|source| {
            StructureError::Io {
                path: path.to_path_buf(),
                source,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, StructureError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                StructureError::NotFound(path.to_path_buf())
            } else {
                StructureError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        })?;
        Self::from_json(&text)
    }
}

pub fn save_model(model: &StructureModel, path: &Path) -> Result<(), StructureError> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<StructureModel, StructureError> {
    StructureModel::load(path)
}

/// On-disk layout of a model (see the README for the schema).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    categories: Vec<String>,
    category_fingerprint: String,
    alpha: f64,
    vocabulary: Vec<String>,
    log_priors: Vec<f64>,
    log_likelihoods: Vec<Vec<f64>>,
}

impl ModelFile {
    fn into_model(self) -> Result<StructureModel, StructureError> {
        let schema = |m: String| Err(StructureError::Schema(m));
        if self.categories.is_empty() {
            return schema("no categories".into());
        }
        if StructureModel::fingerprint(&self.categories) != self.category_fingerprint {
            return schema(
                "category list does not match its fingerprint (order is part of the model)".into(),
            );
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return schema(format!("alpha {} is not positive", self.alpha));
        }
        let k = self.categories.len();
        if self.log_priors.len() != k || self.log_likelihoods.len() != k {
            return schema(format!("expected {k} prior and likelihood rows"));
        }
        let prior_mass: f64 = self.log_priors.iter().map(|p| p.exp()).sum();
        if (prior_mass - 1.0).abs() > 1e-9 {
            return schema(format!("priors sum to {prior_mass}"));
        }
        for (c, row) in self.categories.iter().zip(&self.log_likelihoods) {
            if row.len() != self.vocabulary.len() {
                return schema(format!("likelihood row for `{c}` has wrong length"));
            }
            let mass: f64 = row.iter().map(|l| l.exp()).sum();
            if !self.vocabulary.is_empty() && (mass - 1.0).abs() > 1e-9 {
                return schema(format!("likelihoods for `{c}` sum to {mass}"));
            }
        }
        let mut index = HashMap::with_capacity(self.vocabulary.len());
        for (i, w) in self.vocabulary.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return schema(format!("duplicate vocabulary word `{w}`"));
            }
        }
        Ok(StructureModel {
            categories: self.categories,
            vocabulary: self.vocabulary,
            index,
            log_priors: self.log_priors,
            log_likelihoods: self.log_likelihoods,
            alpha: self.alpha,
        })
    }
}

/// Reads `label, text` rows. Comma or tab separated (taken from the first
/// line); an optional header row (`label`, `segment_id` or `id`, then `text`) is skipped.
pub fn load_labeled(path: &Path) -> Result<Vec<LabeledSegment>, StructureError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            StructureError::NotFound(path.to_path_buf())
        } else {
            StructureError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    parse_labeled(&text).map_err(|msg| StructureError::Data {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn parse_labeled(text: &str) -> Result<Vec<LabeledSegment>, String> {
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let delim = if first.is_some_and(|l| l.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(format!(
                "record {}: expected 2 fields (label, text), found {}",
                i + 1,
                rec.len()
            ));
        }
        let (label, body) = (rec[0].trim(), rec[1].trim());
        let header_key = ["label", "segment_id", "id"]
            .iter()
            .any(|h| label.eq_ignore_ascii_case(h));
        if i == 0 && header_key && body.eq_ignore_ascii_case("text") {
            continue;
        }
        if label.is_empty() {
            return Err(format!("record {}: empty label", i + 1));
        }
        out.push(LabeledSegment::new(label, body));
    }
    Ok(out)
}

/// Stratified, seeded split: each category keeps `round(ratio * n)`
/// examples for training (at least one).
pub fn split_train_test(
    data: &[LabeledSegment],
    ratio: f64,
    seed: u64,
) -> (Vec<LabeledSegment>, Vec<LabeledSegment>) {
    let mut by_label: BTreeMap<&str, Vec<&LabeledSegment>> = BTreeMap::new();
    for seg in data {
        by_label.entry(seg.label.as_str()).or_default().push(seg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut group) in by_label {
        group.shuffle(&mut rng);
        let n_train = ((ratio * group.len() as f64).round() as usize).clamp(1, group.len());
        let (a, b) = group.split_at(n_train);
        train.extend(a.iter().map(|s| (*s).clone()));
        test.extend(b.iter().map(|s| (*s).clone()));
    }
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub category: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_train: usize,
    pub n_test: usize,
    /// `None` when the evaluation set is empty.
    pub accuracy: Option<f64>,
    pub per_class: Vec<ClassReport>,
}

pub fn evaluate(model: &StructureModel, test: &[LabeledSegment], n_train: usize) -> EvalReport {
    let k = model.categories.len();
    let mut tp = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    let mut support = vec![0usize; k];
    let mut correct = 0;
    let pos = |label: &str| model.categories.iter().position(|c| c == label);
    for seg in test {
        let pred = model.predict(&seg.text);
        let p = pos(&pred.label).expect("prediction is a model category");
        predicted[p] += 1;
        if let Some(t) = pos(&seg.label) {
            support[t] += 1;
            if t == p {
                tp[t] += 1;
            }
        }
        if pred.label == seg.label {
            correct += 1;
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    EvalReport {
        n_train,
        n_test: test.len(),
        accuracy: ratio(correct, test.len()),
        per_class: (0..k)
            .map(|i| ClassReport {
                category: model.categories[i].clone(),
                precision: ratio(tp[i], predicted[i]),
                recall: ratio(tp[i], support[i]),
                support: support[i],
            })
            .collect(),
    }
}
