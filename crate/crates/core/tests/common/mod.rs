//! Generators and independent reference implementations shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use narrarc::arcshape::ArcShape;
use narrarc::cluster::Merge;
use narrarc::corpus::FreqVector;
use narrarc::lexicon::{Lexicon, LexiconEntry};
use narrarc::structure::LabeledSegment;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Distinct alphabetic word for an index ("aaaa", "aaab", ...).
pub fn word_for(mut i: usize) -> String {
    let mut chars = ['a'; 4];
    for c in chars.iter_mut().rev() {
        *c = (b'a' + (i % 26) as u8) as char;
        i /= 26;
    }
    chars.iter().collect()
}

/// Lexicon of `n` words with scores on the three-decimal grid.
pub fn synthetic_lexicon<R: Rng>(n: usize, rng: &mut R) -> Lexicon {
    let mut s = || rng.random_range(0..=1000) as f64 / 1000.0;
    let entries = (0..n)
        .map(|i| LexiconEntry {
            word: word_for(i),
            rank: i as u64 + 1,
            arousal: s(),
            valence: s(),
            dominance: s(),
        })
        .collect();
    Lexicon::from_entries(entries).unwrap()
}

pub fn random_sparse<R: Rng>(
    doc: &str,
    vocab: usize,
    max_nonzero: usize,
    rng: &mut R,
) -> FreqVector {
    let k = rng.random_range(0..=max_nonzero);
    FreqVector::from_counts(
        doc,
        (0..k)
            .map(|_| (rng.random_range(0..vocab), rng.random_range(1..=50u64)))
            .collect::<Vec<_>>(),
    )
}

/// Weighted mean over a dense count vector, skipping excluded positions.
pub fn dense_mean(counts: &[u64], scores: &[f64], excluded: &[bool]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0u64;
    for i in 0..counts.len() {
        if !excluded[i] && counts[i] > 0 {
            num += counts[i] as f64 * scores[i];
            den += counts[i];
        }
    }
    (den > 0).then(|| num / den as f64)
}

pub fn densify(v: &FreqVector, vocab: usize) -> Vec<u64> {
    let mut d = vec![0u64; vocab];
    for (&p, &c) in &v.counts {
        d[p] += c;
    }
    d
}

/// Arc computed by summing each trailing window from scratch.
pub fn batch_arc(
    rows: &[FreqVector],
    vocab: usize,
    scores: &[f64],
    excluded: &[bool],
    context: usize,
) -> Vec<Option<f64>> {
    let dense: Vec<Vec<u64>> = rows.iter().map(|r| densify(r, vocab)).collect();
    (0..rows.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(context);
            let mut acc = vec![0u64; vocab];
            for row in &dense[start..=t] {
                for (a, b) in acc.iter_mut().zip(row) {
                    *a += b;
                }
            }
            dense_mean(&acc, scores, excluded)
        })
        .collect()
}

/// Ward linkage by recomputing centroid distances from the raw points at
/// every step. Ties go to the lexicographically smallest (min id, max id).
pub fn naive_ward(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let dim = points[0].len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let centroid = |m: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for &i in m {
            for (a, b) in c.iter_mut().zip(&points[i]) {
                *a += b;
            }
        }
        c.iter().map(|v| v / m.len() as f64).collect()
    };
    let mut merges = Vec::new();
    for step in 0..n - 1 {
        let cents: Vec<Vec<f64>> = clusters.iter().map(|(_, m)| centroid(m)).collect();
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (na, nb) = (clusters[a].1.len() as f64, clusters[b].1.len() as f64);
                let sq: f64 = cents[a]
                    .iter()
                    .zip(&cents[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                let d = (2.0 * na * nb / (na + nb)).sqrt() * sq.sqrt();
                let (ia, ib) = (clusters[a].0, clusters[b].0);
                let pair = (ia.min(ib), ia.max(ib));
                let better = match best {
                    None => true,
                    Some((bd, bp, _, _)) => d < bd || (d == bd && pair < bp),
                };
                if better {
                    best = Some((d, pair, a, b));
                }
            }
        }
        let (d, pair, a, b) = best.unwrap();
        let mut members = clusters[a].1.clone();
        members.extend(&clusters[b].1);
        merges.push(Merge {
            left: pair.0,
            right: pair.1,
            height: d,
            size: members.len(),
        });
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((n + step, members));
    }
    merges
}

/// Inverse of the DFT with every bin at circular frequency >= `m` zeroed,
/// evaluated directly in O(L^2).
pub fn naive_lowpass(x: &[f64], m: usize) -> Vec<f64> {
    let l = x.len();
    let tau = 2.0 * std::f64::consts::PI;
    let spectrum: Vec<(f64, f64)> = (0..l)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let ang = tau * ((k * n) % l) as f64 / l as f64;
                re += v * ang.cos();
                im -= v * ang.sin();
            }
            (re, im)
        })
        .collect();
    (0..l)
        .map(|n| {
            let mut acc = 0.0;
            for (k, (re, im)) in spectrum.iter().enumerate() {
                if k.min(l - k) < m {
                    let ang = tau * ((k * n) % l) as f64 / l as f64;
                    acc += re * ang.cos() - im * ang.sin();
                }
            }
            acc / l as f64
        })
        .collect()
}

/// Raw story shape on `t = i / (len - 1)`, before any normalization.
pub fn raw_shape(shape: ArcShape, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| shape.value_at(i as f64 / (len - 1) as f64))
        .collect()
}

pub fn noisy<R: Rng>(base: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma).unwrap();
    base.iter().map(|v| v + noise.sample(rng)).collect()
}

pub fn random_arc<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..len).map(|_| noise.sample(rng)).collect()
}

pub const MARKERS: [[&str; 6]; 4] = [
    ["suspense", "dread", "threat", "brink", "looming", "uneasy"],
    [
        "penalty", "sentence", "exile", "scolded", "punished", "banished",
    ],
    ["prize", "gift", "bounty", "treasure", "rewarded", "granted"],
    [
        "triumph",
        "won",
        "conquered",
        "champion",
        "defeated",
        "prevailed",
    ],
];
pub const CATEGORIES: [&str; 4] = ["tension", "punishment", "reward", "victory"];

/// Labeled corpus: each segment mixes neutral filler with its class's
/// marker words. With `overlap` > 0, that share of marker slots draws from
/// another class's markers instead.
pub fn structure_corpus<R: Rng>(
    per_class: usize,
    overlap: f64,
    rng: &mut R,
) -> Vec<LabeledSegment> {
    let filler: Vec<String> = (0..200).map(word_for).collect();
    let mut out = Vec::new();
    for _ in 0..per_class {
        for (c, cat) in CATEGORIES.iter().enumerate() {
            let mut words: Vec<&str> = Vec::new();
            for i in 0..60 {
                if i % 6 == 0 {
                    let class = if rng.random_bool(overlap) {
                        (c + rng.random_range(1..4)) % 4
                    } else {
                        c
                    };
                    words.push(MARKERS[class].choose(rng).unwrap());
                } else {
                    words.push(filler.choose(rng).unwrap());
                }
            }
            out.push(LabeledSegment::new(*cat, words.join(" ")));
        }
    }
    out
}
