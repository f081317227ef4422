use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use storyseg::agreement::{brute_force_agreement, max_agreement};
use storyseg::embedding::{triplet_loss, EmbeddingModel, Triplet};
use storyseg::features::{
    gaussian_weight, quantity_of_speech, spectral_cluster_terms, symmetric_eigen, textual_semantic_vector,
    time_features, visual_semantic_vector, ConceptGroups, SemanticConfig, TermEmbeddings, TranscriptTerm,
};
use storyseg::retrieval::{rank_objective, swapped_pairs, train_rank_model, PreferencePair, RankConfig, RankModel};
use storyseg::segment::{compute_wss_table, sweep, DpState};
use storyseg::{mean_iou, AnnotationSet, Segmentation, ShotRecord, Timeline};

fn embedded() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..14, 1usize..4).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), n))
}

fn segmentation(n: usize) -> impl Strategy<Value = Segmentation> {
    prop::collection::vec(any::<bool>(), n - 1).prop_map(move |cuts| {
        let mut b = vec![0];
        b.extend((1..n).filter(|&i| cuts[i - 1]));
        Segmentation::from_boundaries(n, &b).unwrap()
    })
}

fn agreement_case() -> impl Strategy<Value = (AnnotationSet, Timeline)> {
    (2usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(segmentation(n), 1..4),
            prop::collection::vec(1u64..30, n),
        )
            .prop_map(|(anns, lens)| {
                let mut offsets = vec![0];
                for l in lens {
                    offsets.push(offsets.last().unwrap() + l);
                }
                (AnnotationSet::new(anns).unwrap(), Timeline::from_offsets(offsets).unwrap())
            })
    })
}

fn shots(lens: &[u64]) -> Vec<ShotRecord> {
    let mut start = 0;
    lens.iter()
        .enumerate()
        .map(|(i, &l)| {
            let s = ShotRecord::new(i, start, start + l);
            start += l;
            s
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn story_count_does_not_grow_with_penalty(x in embedded(), mut cs in prop::collection::vec(0.0..50.0f64, 2..10)) {
        cs.sort_by(f64::total_cmp);
        let dp = DpState::new(&compute_wss_table(&x).unwrap());
        let pts = sweep(&dp, &cs);
        for w in pts.windows(2) {
            prop_assert!(w[1].change_points <= w[0].change_points);
        }
    }

    #[test]
    fn dp_costs_ignore_translation(x in embedded(), shift in -100.0..100.0f64) {
        let moved: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let a = DpState::new(&compute_wss_table(&x).unwrap());
        let b = DpState::new(&compute_wss_table(&moved).unwrap());
        for m in 0..a.n() {
            prop_assert!((a.cost(m) - b.cost(m)).abs() <= 1e-7 * (1.0 + a.cost(m).abs()));
        }
    }

    #[test]
    fn optimum_matches_its_reported_cost(x in embedded(), c in 0.0..20.0f64) {
        let table = compute_wss_table(&x).unwrap();
        let dp = DpState::new(&table);
        let m = dp.best_m(c);
        let seg = dp.reconstruct(m);
        prop_assert_eq!(seg.stories().len(), m + 1);
        let wss: f64 = seg.stories().iter().map(|s| table.get(s.first_shot, s.len())).sum();
        prop_assert!((wss - dp.cost(m)).abs() <= 1e-9 * (1.0 + wss));
    }

    #[test]
    fn agreement_reports_its_own_mean_iou((set, tl) in agreement_case()) {
        let r = max_agreement(&set, &tl).unwrap();
        let again = mean_iou(&r.segmentation, &set, &tl).unwrap();
        prop_assert!((r.mean_iou - again).abs() < 1e-12);
        prop_assert!((r.j - 2.0 * set.len() as f64 * r.mean_iou).abs() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.mean_iou));
    }

    #[test]
    fn exhaustive_optimum_bounds_everything((set, tl) in agreement_case()) {
        let exact = brute_force_agreement(&set, &tl, 14, None).unwrap();
        let dp = max_agreement(&set, &tl).unwrap();
        prop_assert!(dp.mean_iou <= exact.mean_iou + 1e-12);
        for a in set.annotations() {
            prop_assert!(mean_iou(a, &set, &tl).unwrap() <= exact.mean_iou + 1e-12);
        }
    }

    #[test]
    fn agreement_ignores_annotation_order((set, tl) in agreement_case(), rot in 0usize..4) {
        let mut anns = set.annotations().to_vec();
        let k = rot % anns.len();
        anns.rotate_left(k);
        anns.reverse();
        let a = max_agreement(&set, &tl).unwrap();
        let b = max_agreement(&AnnotationSet::new(anns).unwrap(), &tl).unwrap();
        prop_assert_eq!(a.segmentation, b.segmentation);
        prop_assert_eq!(a.mean_iou.to_bits(), b.mean_iou.to_bits());
    }

    #[test]
    fn gaussian_is_half_at_half_width(sigma in 0.1..1e4f64, t in -1e5..1e5f64) {
        let half = sigma * (2.0 * std::f64::consts::LN_2).sqrt();
        prop_assert!((gaussian_weight(t + half, t, sigma) - 0.5).abs() < 1e-12);
        prop_assert!((gaussian_weight(t, t, sigma) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn semantic_vectors_are_bounded(
        lens in prop::collection::vec(1u64..200, 1..6),
        spoken in prop::collection::vec((0usize..4, 0.0..1.0f64, prop::option::of(prop::collection::vec(0.0..=1.0f64, 6))), 0..12),
        sigma in 1.0..500.0f64,
    ) {
        let shots = shots(&lens);
        let total = shots.last().unwrap().end_frame as f64;
        let words = ["a", "b", "c", "d"];
        let terms: Vec<TranscriptTerm> = spoken
            .iter()
            .map(|(w, pos, probs)| TranscriptTerm { unigram: words[*w].into(), t_u: pos * total, svm_probs: probs.clone() })
            .collect();
        let groups = ConceptGroups {
            k: 2,
            assignment: [("a", 0), ("b", 0), ("c", 1), ("d", 1)].iter().map(|(t, g)| (t.to_string(), *g)).collect(),
        };
        let cfg = SemanticConfig { sigma_a: sigma, k: 2 };
        for shot in &shots {
            let t = textual_semantic_vector(shot, &terms, &groups, &cfg).unwrap();
            let v = visual_semantic_vector(shot, &terms, &groups, &cfg).unwrap();
            for g in 0..2 {
                let count = terms.iter().filter(|x| groups.group_of(&x.unigram) == Some(g)).count() as f64;
                prop_assert!(t[g] >= 0.0 && t[g] <= count + 1e-12);
                prop_assert!(v[g] >= 0.0 && v[g] <= t[g] + 1e-12);
            }
        }
    }

    #[test]
    fn pooled_scalars_are_unit_bounded(counts in prop::collection::vec(0u32..500, 1..20), lens in prop::collection::vec(1u64..500, 1..20)) {
        for q in quantity_of_speech(&counts) {
            prop_assert!((0.0..=1.0).contains(&q));
        }
        let tf = time_features(&shots(&lens));
        let len_sum: f64 = tf.iter().map(|p| p.1).sum();
        prop_assert!((len_sum - 1.0).abs() < 1e-12);
        for (pos, len) in tf {
            prop_assert!((0.0..1.0).contains(&pos) && len > 0.0 && len <= 1.0);
        }
    }

    #[test]
    fn eigen_pairs_satisfy_definition(n in 1usize..9, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let e = symmetric_eigen(&a, n).unwrap();
        for w in e.values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (lambda, v) in e.values.iter().zip(&e.vectors) {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((norm - 1.0).abs() < 1e-10);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                prop_assert!((av - lambda * v[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn satisfied_triplets_have_zero_loss(seed in any::<u64>(), far in 1.0..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = EmbeddingModel::glorot(&[3, 4, 2], false, &mut rng).unwrap();
        let anchor = [0.1, -0.2, 0.3];
        let fa = model.forward(&anchor, None).unwrap();
        // Any input whose embedding is at least 1 further than the positive's
        // leaves the hinge inactive; the positive is the anchor itself.
        let mut negative = anchor;
        let mut step = 0.0;
        loop {
            negative[0] = anchor[0] + step;
            let fnn = model.forward(&negative, None).unwrap();
            let d: f64 = fa.iter().zip(&fnn).map(|(a, b)| (a - b) * (a - b)).sum();
            if d >= far {
                break;
            }
            step += 1.0;
            if step > 1e6 {
                return Ok(());
            }
        }
        let t = Triplet { anchor: &anchor, positive: &anchor, negative: &negative };
        prop_assert_eq!(triplet_loss(&model, &t, None).unwrap(), 0.0);
    }

    #[test]
    fn rank_ordering_ignores_positive_scaling(
        w in prop::collection::vec(-3.0..3.0f64, 4),
        raw in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 4), prop::collection::vec(-1.0..1.0f64, 4)), 1..20),
        scale in 0.01..100.0f64,
    ) {
        let pairs: Vec<PreferencePair> = raw.into_iter().map(|(better, worse)| PreferencePair { better, worse }).collect();
        let a = RankModel { w_r: w.clone(), c_r: 1.0, objective_trace: Vec::new() };
        let b = RankModel { w_r: w.iter().map(|x| x * scale).collect(), c_r: 1.0, objective_trace: Vec::new() };
        prop_assert_eq!(swapped_pairs(&a, &pairs).unwrap(), swapped_pairs(&b, &pairs).unwrap());
    }

    #[test]
    fn rank_trace_never_increases(
        raw in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 3), prop::collection::vec(-1.0..1.0f64, 3)), 1..15),
        c_r in 0.1..50.0f64,
    ) {
        let pairs: Vec<PreferencePair> = raw.into_iter().map(|(better, worse)| PreferencePair { better, worse }).collect();
        let model = train_rank_model(&pairs, &RankConfig { c_r, iterations: 200 }).unwrap();
        let trace = &model.objective_trace;
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let diffs: Vec<Vec<f64>> = pairs.iter().map(|p| p.better.iter().zip(&p.worse).map(|(b, w)| b - w).collect()).collect();
        let at_zero = rank_objective(&vec![0.0; 3], &diffs, c_r);
        prop_assert!((trace[0] - at_zero).abs() < 1e-9 * (1.0 + at_zero));
        let final_obj = rank_objective(&model.w_r, &diffs, c_r);
        prop_assert!((final_obj - trace.last().unwrap()).abs() < 1e-9 * (1.0 + final_obj));
    }
}

fn toy_embeddings() -> TermEmbeddings {
    let mut e = TermEmbeddings::new();
    for (i, t) in ["apple", "pear", "plum", "car", "bus", "train", "rain", "snow"].iter().enumerate() {
        let cluster = i / 3;
        let mut v = vec![0.05 * i as f64; 4];
        v[cluster] += 1.0;
        e.insert(t.to_string(), v);
    }
    e
}

#[test]
fn spectral_grouping_is_reproducible() {
    let e = toy_embeddings();
    let a = spectral_cluster_terms(&e, 3, 11).unwrap();
    let b = spectral_cluster_terms(&e, 3, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.assignment.len(), e.len());
    assert!(a.assignment.values().all(|&g| g < 3));
    assert_eq!(a.group_of("apple"), a.group_of("pear"));
    assert_eq!(a.group_of("car"), a.group_of("bus"));
    assert_ne!(a.group_of("apple"), a.group_of("car"));
}

#[test]
fn more_groups_than_terms_is_rejected() {
    assert!(spectral_cluster_terms(&toy_embeddings(), 9, 0).is_err());
}

#[test]
fn segmentation_of_long_video_finishes_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    use rand::Rng;
    let x: Vec<Vec<f64>> = (0..500).map(|_| (0..30).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let start = std::time::Instant::now();
    let r = storyseg::segment::segment_video(&x, 1.0).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(r.segmentation.n_shots(), 500);
}
