mod common;

use narrarc::arcshape::{classify_arc, lowpass, resample, smooth_ma, znormalize, NormalizedArc};
use narrarc::cluster::{adjusted_rand_index, cluster_means, cut, distance_matrix, ward_linkage};
use narrarc::corpus::{segment, stack, tokenize, FreqVector, WordList};
use narrarc::lexicon::{
    parse_lexicon, score_vector, ColumnMap, Dimension, Lexicon, LexiconEntry, StopMask,
};
use narrarc::sentiment::{arc, emotion_score, interpolate_gaps, ArcPoint, SentimentArc};
use narrarc::structure::{train, LabeledSegment};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lexicon_strategy() -> impl Strategy<Value = Lexicon> {
    prop::collection::vec((0u32..=1000, 0u32..=1000, 0u32..=1000), 1..60).prop_map(|rows| {
        let entries = rows
            .into_iter()
            .enumerate()
            .map(|(i, (a, v, d))| LexiconEntry {
                word: common::word_for(i * 7),
                rank: (i as u64 + 1) * 3,
                arousal: a as f64 / 1000.0,
                valence: v as f64 / 1000.0,
                dominance: d as f64 / 1000.0,
            })
            .collect();
        Lexicon::from_entries(entries).unwrap()
    })
}

fn counts(vocab: usize) -> impl Strategy<Value = Vec<(usize, u64)>> {
    prop::collection::vec((0..vocab, 1u64..40), 0..30)
}

fn points(max_n: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, len), 2..max_n)
}

proptest! {
    #[test]
    fn lexicon_round_trips_through_table(lex in lexicon_strategy()) {
        let mut buf = Vec::new();
        lex.write_table(&mut buf).unwrap();
        let back = parse_lexicon(std::str::from_utf8(&buf).unwrap(), &ColumnMap::table()).unwrap();
        prop_assert_eq!(back, lex);
    }

    #[test]
    fn score_vector_follows_positions(lex in lexicon_strategy()) {
        for dim in Dimension::ALL {
            let s = score_vector(&lex, dim);
            prop_assert_eq!(s.len(), lex.len());
            for e in lex.entries() {
                prop_assert_eq!(s.values[lex.position(&e.word).unwrap()], e.score(dim));
            }
        }
    }

    #[test]
    fn score_matches_weighted_mean(lex in lexicon_strategy(), raw in counts(60)) {
        let scores = score_vector(&lex, Dimension::Valence);
        let raw: Vec<_> = raw.into_iter().map(|(p, c)| (p % lex.len(), c)).collect();
        let v = FreqVector::from_counts("d", raw);
        let mask = StopMask::none(lex.len());
        let got = emotion_score(&v, &scores, &mask).unwrap();
        let want = common::dense_mean(&common::densify(&v, lex.len()), &scores.values, &mask.excluded);
        match (got, want) {
            (Some(g), Some(w)) => {
                prop_assert!((g - w).abs() < 1e-12);
                let present = v.counts.keys().map(|&p| scores.values[p]);
                let lo = present.clone().fold(f64::INFINITY, f64::min);
                let hi = present.fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
            }
            (None, None) => prop_assert!(v.counts.is_empty()),
            _ => prop_assert!(false, "defined-ness differs"),
        }
    }

    #[test]
    fn score_ignores_count_scale(lex in lexicon_strategy(), raw in counts(60), c in 1u64..20) {
        let scores = score_vector(&lex, Dimension::Arousal);
        let raw: Vec<_> = raw.into_iter().map(|(p, n)| (p % lex.len(), n)).collect();
        let scaled: Vec<_> = raw.iter().map(|&(p, n)| (p, n * c)).collect();
        let mask = StopMask::none(lex.len());
        let a = emotion_score(&FreqVector::from_counts("d", raw), &scores, &mask).unwrap();
        let b = emotion_score(&FreqVector::from_counts("d", scaled), &scores, &mask).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
        }
    }

    #[test]
    fn segmentation_covers_prefix(n in 0usize..400, w in 1usize..60) {
        let words = WordList {
            source_id: "d".into(),
            words: (0..n).map(common::word_for).collect(),
        };
        let seg = segment(&words, w).unwrap();
        prop_assert_eq!(seg.segments.len(), n / w);
        prop_assert_eq!(seg.discarded, n % w);
        let joined: Vec<String> = seg.segments.iter().flat_map(|s| s.words.iter().cloned()).collect();
        prop_assert_eq!(&joined[..], &words.words[..n - n % w]);
        for (i, s) in seg.segments.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert_eq!(s.words.len(), w);
        }
    }

    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,200}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once.clone());
        for w in &once {
            prop_assert!(!w.is_empty() && w.chars().all(char::is_alphabetic));
        }
    }

    #[test]
    fn incremental_arc_matches_batch(
        rows in prop::collection::vec(counts(25), 1..60),
        context in 1usize..15,
        seed in any::<u64>(),
    ) {
        let lex = common::synthetic_lexicon(25, &mut ChaCha8Rng::seed_from_u64(seed));
        let scores = score_vector(&lex, Dimension::Dominance);
        let mask = StopMask::none(lex.len());
        let rows: Vec<FreqVector> = rows.into_iter().map(|r| FreqVector::from_counts("m", r)).collect();
        let got = arc(&stack("m", rows.clone(), 10).unwrap(), &scores, &mask, context).unwrap();
        let want = common::batch_arc(&rows, lex.len(), &scores.values, &mask.excluded, context);
        prop_assert_eq!(got.len(), rows.len());
        for (g, w) in got.scores().iter().zip(&want) {
            match (g, w) {
                (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-9),
                (g, w) => prop_assert_eq!(g.is_none(), w.is_none()),
            }
        }
    }

    #[test]
    fn gaps_interpolate_linearly(raw in prop::collection::vec(prop::option::weighted(0.6, 0.0f64..1.0), 1..50)) {
        let a = SentimentArc {
            doc: "d".into(),
            points: raw.iter().enumerate().map(|(i, s)| ArcPoint { segment_index: i, score: *s, coverage: 1.0 }).collect(),
            context: 1,
        };
        let filled = interpolate_gaps(&a);
        let anchors: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_some()).collect();
        prop_assert_eq!(filled.no_anchor, anchors.is_empty());
        if anchors.is_empty() {
            return Ok(());
        }
        for (i, p) in filled.arc.points.iter().enumerate() {
            let prev = anchors.iter().rev().find(|&&j| j <= i);
            let next = anchors.iter().find(|&&j| j >= i);
            let want = match (prev, next) {
                (Some(&p0), Some(&p1)) if p0 == p1 => raw[p0].unwrap(),
                (Some(&p0), Some(&p1)) => {
                    let (y0, y1) = (raw[p0].unwrap(), raw[p1].unwrap());
                    y0 + (y1 - y0) * (i - p0) as f64 / (p1 - p0) as f64
                }
                (Some(&p0), None) => raw[p0].unwrap(),
                (None, Some(&p1)) => raw[p1].unwrap(),
                (None, None) => unreachable!(),
            };
            prop_assert!((p.score.unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_keeps_ramps(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 2usize..80, len in 2usize..150) {
        let ramp: Vec<f64> = (0..n).map(|i| a + b * i as f64 / (n - 1) as f64).collect();
        let out = resample(&ramp, len).unwrap();
        prop_assert_eq!(out.len(), len);
        for (j, v) in out.iter().enumerate() {
            prop_assert!((v - (a + b * j as f64 / (len - 1) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn lowpass_matches_dft_and_keeps_mean(x in prop::collection::vec(-3.0f64..3.0, 2..90), frac in 0.0f64..1.0) {
        let l = x.len();
        let m = 1 + ((l / 2) as f64 * frac) as usize;
        let y = lowpass(&x, m).unwrap();
        let oracle = common::naive_lowpass(&x, m);
        for (a, b) in y.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&y) - mean(&x)).abs() < 1e-9);
        let full = lowpass(&x, l / 2 + 1).unwrap();
        for (a, b) in full.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_keeps_constants(c in -5.0f64..5.0, n in 1usize..40, half in 0usize..10) {
        let w = (2 * half + 1).min(if n % 2 == 1 { n } else { n - 1 });
        let out = smooth_ma(&vec![c; n], w).unwrap();
        for v in out {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn znormalize_is_idempotent(x in prop::collection::vec(-100.0f64..100.0, 2..80)) {
        let once = znormalize(&x);
        let twice = znormalize(&once);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_ignores_affine_maps(x in prop::collection::vec(-5.0f64..5.0, 4..80), a in 0.01f64..50.0, b in -20.0f64..20.0) {
        let base = classify_arc(&NormalizedArc::new("x", &x)).unwrap().label;
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert_eq!(classify_arc(&NormalizedArc::new("x", &moved)).unwrap().label, base);
    }

    #[test]
    fn negation_mirrors_label(x in prop::collection::vec(-5.0f64..5.0, 4..80)) {
        let base = classify_arc(&NormalizedArc::new("x", &x)).unwrap().label;
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(classify_arc(&NormalizedArc::new("x", &neg)).unwrap().label, base.mirror());
    }

    #[test]
    fn distances_match_brute_force(pts in points(20, 7)) {
        let d = distance_matrix(&pts).unwrap();
        for i in 0..pts.len() {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..pts.len() {
                let want = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!((d.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ward_matches_naive_and_is_monotone(pts in points(25, 6)) {
        let link = ward_linkage(&distance_matrix(&pts).unwrap()).unwrap();
        link.validate().unwrap();
        let naive = common::naive_ward(&pts);
        for (g, w) in link.merges.iter().zip(&naive) {
            prop_assert_eq!((g.left, g.right, g.size), (w.left, w.right, w.size));
            prop_assert!((g.height - w.height).abs() < 1e-9);
        }
        for w in link.merges.windows(2) {
            prop_assert!(w[1].height >= w[0].height);
        }
    }

    #[test]
    fn cut_gives_k_clusters_and_ignores_order(pts in points(30, 5), k_seed in any::<usize>(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = pts.len();
        let k = k_seed % n + 1;
        let base = cut(&ward_linkage(&distance_matrix(&pts).unwrap()).unwrap(), k).unwrap();
        let mut labels = base.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        prop_assert_eq!(labels, (1..=k).collect::<Vec<_>>());

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let perm = cut(&ward_linkage(&distance_matrix(&shuffled).unwrap()).unwrap(), k).unwrap();
        let mut back = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            back[i] = perm.labels[pos];
        }
        prop_assert!((adjusted_rand_index(&base.labels, &back) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn means_match_brute_force(pts in points(30, 5), k_seed in any::<usize>()) {
        let k = k_seed % pts.len() + 1;
        let a = cut(&ward_linkage(&distance_matrix(&pts).unwrap()).unwrap(), k).unwrap();
        let means = cluster_means(&pts, &a).unwrap();
        prop_assert_eq!(means.len(), k);
        for (c, mean) in &means {
            let members: Vec<&Vec<f64>> = pts.iter().zip(&a.labels).filter(|(_, l)| *l == c).map(|(p, _)| p).collect();
            for (j, m) in mean.iter().enumerate() {
                let want = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                prop_assert!((m - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn likelihoods_sum_to_one_and_order_is_ignored(seed in any::<u64>(), alpha in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = common::structure_corpus(3, 0.3, &mut rng);
        let model = train(&data, &common::CATEGORIES, alpha).unwrap();
        for row in model.log_likelihoods() {
            let total: f64 = row.iter().map(|l| l.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        let prior: f64 = model.log_priors().iter().map(|l| l.exp()).sum();
        prop_assert!((prior - 1.0).abs() < 1e-9);

        let text = &data[(seed % data.len() as u64) as usize].text;
        let mut words: Vec<&str> = text.split_whitespace().collect();
        words.reverse();
        let a = model.predict(text);
        let b = model.predict(&words.join(" "));
        prop_assert_eq!(&a.label, &b.label);
        for (x, y) in a.log_scores.iter().zip(&b.log_scores) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn ward_ties_follow_smallest_pair() {
    // Four corners of a unit square: every side is a tie at the first step.
    let pts = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ];
    let link = ward_linkage(&distance_matrix(&pts).unwrap()).unwrap();
    let naive = common::naive_ward(&pts);
    assert_eq!((link.merges[0].left, link.merges[0].right), (0, 1));
    assert_eq!((link.merges[1].left, link.merges[1].right), (2, 3));
    for (g, w) in link.merges.iter().zip(&naive) {
        assert_eq!((g.left, g.right, g.size), (w.left, w.right, w.size));
        assert!((g.height - w.height).abs() < 1e-12);
    }
}

#[test]
fn structure_posteriors_by_hand() {
    let data = vec![
        LabeledSegment::new("tension", "dread dread wait"),
        LabeledSegment::new("reward", "gold"),
    ];
    let model = train(&data, &["tension", "reward"], 1.0).unwrap();
    // Vocabulary {dread, gold, wait}; tension has 3 tokens, reward 1.
    let p = model.predict("dread gold");
    let want_t = (0.5f64).ln() + (3.0f64 / 6.0).ln() + (1.0f64 / 6.0).ln();
    let want_r = (0.5f64).ln() + (1.0f64 / 4.0).ln() + (2.0f64 / 4.0).ln();
    assert!((p.log_scores[0] - want_t).abs() < 1e-12);
    assert!((p.log_scores[1] - want_r).abs() < 1e-12);
    assert_eq!(p.label, "reward");
}
