//! Frequency-weighted emotion scores and sliding-context arcs.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FreqVector, SegmentMatrix};
use crate::lexicon::{ScoreVector, StopMask};

/// Number of trailing segments accumulated for each arc point.
pub const DEFAULT_CONTEXT: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SentimentError {
    #[error("score vector has {scores} entries but stop mask has {mask}")]
    Misaligned { scores: usize, mask: usize },
    #[error("frequency vector references position {position} beyond vocabulary of {len}")]
    OutOfVocabulary { position: usize, len: usize },
    #[error("context must be at least 1")]
    ZeroContext,
}

/// Weighted mean of word scores, ignoring masked positions. `None` means the
/// vector carries no usable signal (nothing left after masking).
pub fn emotion_score(
    freq: &FreqVector,
    scores: &ScoreVector,
    mask: &StopMask,
) -> Result<Option<f64>, SentimentError> {
    if scores.len() != mask.len() {
        return Err(SentimentError::Misaligned {
            scores: scores.len(),
            mask: mask.len(),
        });
    }
    let mut weighted = 0.0;
    let mut total: u64 = 0;
    for (&pos, &count) in &freq.counts {
        let Some(&score) = scores.values.get(pos) else {
            return Err(SentimentError::OutOfVocabulary {
                position: pos,
                len: scores.len(),
            });
        };
        if mask.excluded[pos] {
            continue;
        }
        weighted += score * count as f64;
        total += count;
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(weighted / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPoint {
    pub segment_index: usize,
    /// `None` marks a point without signal.
    pub score: Option<f64>,
    /// In-vocabulary share of the segment's own tokens.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentArc {
    pub doc: String,
    pub points: Vec<ArcPoint>,
    pub context: usize,
}

impl SentimentArc {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scores(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.score).collect()
    }

    pub fn defined_count(&self) -> usize {
        self.points.iter().filter(|p| p.score.is_some()).count()
    }

    /// Scores with gaps filled, or `None` when no point carries signal.
    pub fn filled_values(&self) -> Option<Vec<f64>> {
        let filled = interpolate_gaps(self);
        if filled.no_anchor {
            return None;
        }
        Some(
            filled
                .arc
                .points
                .iter()
                .map(|p| p.score.unwrap_or(0.0))
                .collect(),
        )
    }
}

/// Scores every segment over the trailing `context` segments.
///
/// The window is maintained incrementally: each row is added, the
/// accumulation is scored, then the row that falls out of the next window is
/// subtracted. Early segments use however many rows exist so far, so the arc
/// has exactly one point per row.
pub fn arc(
    matrix: &SegmentMatrix,
    scores: &ScoreVector,
    mask: &StopMask,
    context: usize,
) -> Result<SentimentArc, SentimentError> {
    if context == 0 {
        return Err(SentimentError::ZeroContext);
    }
    let mut acc = FreqVector {
        doc: matrix.doc.clone(),
        ..Default::default()
    };
    let mut points = Vec::with_capacity(matrix.rows.len());
    for (t, row) in matrix.rows.iter().enumerate() {
        acc.add(row);
        points.push(ArcPoint {
            segment_index: t,
            score: emotion_score(&acc, scores, mask)?,
            coverage: row.coverage(),
        });
        if t + 1 >= context {
            acc.subtract(&matrix.rows[t + 1 - context]);
        }
    }
    Ok(SentimentArc {
        doc: matrix.doc.clone(),
        points,
        context,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapFill {
    pub arc: SentimentArc,
    /// Set when the arc had no defined point to interpolate from; the arc is
    /// then returned unchanged.
    pub no_anchor: bool,
}

/// Fills missing points by linear interpolation between the nearest defined
/// neighbours; leading and trailing gaps copy the nearest defined value.
pub fn interpolate_gaps(arc: &SentimentArc) -> GapFill {
    let anchors: Vec<usize> = arc
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.score.map(|_| i))
        .collect();
    if anchors.is_empty() {
        if !arc.is_empty() {
            warn!(
                "arc `{}` has no defined scores; gaps left unfilled",
                arc.doc
            );
        }
        return GapFill {
            arc: arc.clone(),
            no_anchor: true,
        };
    }
    let value = |i: usize| arc.points[i].score.expect("anchor is defined");
    let mut out = arc.clone();
    let first = anchors[0];
    let last = *anchors.last().unwrap();
    for p in &mut out.points[..first] {
        p.score = Some(value(first));
    }
    for p in &mut out.points[last + 1..] {
        p.score = Some(value(last));
    }
    for pair in anchors.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (value(a), value(b));
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            out.points[i].score = Some(va + (vb - va) * f);
        }
    }
    GapFill {
        arc: out,
        no_anchor: false,
    }
}
