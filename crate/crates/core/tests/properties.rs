//! Property-based checks of the core invariants.

use proptest::prelude::*;

use supertoken::classifier::{attention_maps, forward, ClassifierParams, ModelConfig};
use supertoken::cluster::{
    compute_associations, init_centroids, update_centers, AssignmentMap, AssocEntry, AssociationMatrix, ClusterConfig,
    SupertokenSet,
};
use supertoken::cube::{HsiCube, LabelMap, IGNORE};
use supertoken::derivative::{first_derivative, second_derivative};
use supertoken::eval::{metrics, ConfusionMatrix};
use supertoken::features::{project_features, FeatureMap, LinearMap};
use supertoken::labels::{soft_labels, LabelMode};

fn cube_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..6, 1usize..6, 3usize..12).prop_flat_map(|(h, w, d)| {
        let n = h * w * d;
        (Just(h), Just(w), Just(d), prop::collection::vec(-3.0f64..3.0, n), prop::collection::vec(-3.0f64..3.0, n))
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_is_linear((h, w, d, x, y) in cube_strategy(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let step = 1;
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let dx = first_derivative(&HsiCube::new(h, w, d, x).unwrap(), step).unwrap();
        let dy = first_derivative(&HsiCube::new(h, w, d, y).unwrap(), step).unwrap();
        let dc = first_derivative(&HsiCube::new(h, w, d, combo).unwrap(), step).unwrap();
        let expected: Vec<f64> = dx.data().iter().zip(dy.data()).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(max_abs_diff(dc.data(), &expected) <= 1e-12);
    }

    #[test]
    fn second_derivative_composes((h, w, d, x, _) in cube_strategy(), step in 1usize..3) {
        prop_assume!(d > 2 * step);
        let cube = HsiCube::new(h, w, d, x).unwrap();
        let twice = first_derivative(&first_derivative(&cube, step).unwrap(), step).unwrap();
        let second = second_derivative(&cube, step).unwrap();
        prop_assert_eq!(second.bands(), d - 2 * step);
        prop_assert!(max_abs_diff(second.data(), twice.data()) <= 1e-12);
    }

    #[test]
    fn projection_is_linear(
        rows in prop::collection::vec(-2.0f64..2.0, 3 * 4 * 5),
        other in prop::collection::vec(-2.0f64..2.0, 3 * 4 * 5),
        seed in any::<u64>(),
        a in -2.0f64..2.0,
    ) {
        let map = LinearMap::init(5, 3, seed).unwrap();
        let x = FeatureMap::new(3, 4, 5, rows.clone()).unwrap();
        let y = FeatureMap::new(3, 4, 5, other.clone()).unwrap();
        let combo: Vec<f64> = rows.iter().zip(&other).map(|(p, q)| a * p + q).collect();
        let pc = project_features(&FeatureMap::new(3, 4, 5, combo).unwrap(), &map).unwrap();
        let (px, py) = (project_features(&x, &map).unwrap(), project_features(&y, &map).unwrap());
        let expected: Vec<f64> = px.rows().iter().zip(py.rows()).map(|(p, q)| a * p + q).collect();
        prop_assert!(max_abs_diff(pc.rows(), &expected) <= 1e-12);
    }

    #[test]
    fn association_and_update_match_dense(
        h in 2usize..10,
        w in 2usize..10,
        dim in 1usize..4,
        per_cell in 1usize..5,
        seed in any::<u64>(),
    ) {
        prop_assume!(per_cell == 1 || (h >= 4 && w >= 4));
        let mut rng = supertoken::rng::SeededRng::new(seed);
        let mut field = || FeatureMap::new(h, w, dim, (0..h * w * dim).map(|_| rng.uniform()).collect()).unwrap();
        let semantic = field();
        let query = FeatureMap::sum(&[&semantic, &field()]).unwrap();
        let cfg = ClusterConfig { grid: 1, per_cell, iterations: 1, knn: 2, window: 1, jitter: None };
        let centers = init_centroids(&semantic, &cfg).unwrap();
        let assoc = compute_associations(&query, &centers, &cfg).unwrap();
        let updated = update_centers(&assoc, &semantic, &centers).unwrap();
        let m = centers.count();
        let dense: Vec<Vec<f64>> = (0..h * w)
            .map(|i| (0..m)
                .map(|j| {
                    let d2: f64 = query.row(i).iter().zip(centers.feature(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2).exp()
                })
                .collect())
            .collect();
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                prop_assert!((assoc.weight(i, j) - v).abs() <= 1e-12);
            }
        }
        for j in 0..m {
            let total: f64 = dense.iter().map(|r| r[j]).sum();
            for c in 0..dim {
                let v: f64 = (0..h * w).map(|i| dense[i][j] / total * semantic.row(i)[c]).sum();
                prop_assert!((updated.feature(j)[c] - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn hard_count_labels_are_histograms(
        ids in prop::collection::vec(0u32..6, 30),
        gt in prop::collection::vec(prop_oneof![4 => 0u16..4, 1 => Just(IGNORE)], 30),
    ) {
        let assignment = AssignmentMap::new(5, 6, 6, ids.clone()).unwrap();
        let rows = ids.iter().map(|&center| vec![AssocEntry { center, sq_dist: 0.0 }]).collect();
        let assoc = AssociationMatrix::from_rows(6, rows).unwrap();
        let labels = soft_labels(&assignment, &assoc, &LabelMap::new(5, 6, gt.clone()).unwrap(), 4, LabelMode::HardCount).unwrap();
        for t in 0..6u32 {
            let mut hist = [0usize; 4];
            for (&i, &g) in ids.iter().zip(&gt) {
                if i == t && g != IGNORE {
                    hist[g as usize] += 1;
                }
            }
            let total: usize = hist.iter().sum();
            prop_assert_eq!(labels.is_valid(t as usize), total > 0);
            if total > 0 {
                let row = labels.row(t as usize);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                for k in 0..4 {
                    prop_assert_eq!(row[k], hist[k] as f64 / total as f64);
                }
            }
        }
    }

    #[test]
    fn metrics_ignore_class_order(counts in prop::collection::vec(0u64..20, 16), perm_seed in any::<u64>()) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let rows: Vec<Vec<u64>> = counts.chunks(4).map(<[u64]>::to_vec).collect();
        let mut perm: Vec<usize> = (0..4).collect();
        let mut rng = supertoken::rng::SeededRng::new(perm_seed);
        for i in (1..4).rev() {
            perm.swap(i, rng.below(i + 1));
        }
        let permuted: Vec<Vec<u64>> = (0..4).map(|r| (0..4).map(|c| rows[perm[r]][perm[c]]).collect()).collect();
        let a = metrics(&ConfusionMatrix::from_rows(&rows).unwrap()).unwrap();
        let b = metrics(&ConfusionMatrix::from_rows(&permuted).unwrap()).unwrap();
        for (x, y) in [(a.overall_accuracy, b.overall_accuracy), (a.average_accuracy, b.average_accuracy),
                       (a.kappa, b.kappa), (a.miou, b.miou), (a.class_f1, b.class_f1)] {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(a.overall_accuracy >= 0.0 && a.overall_accuracy <= 1.0);
        prop_assert!(a.kappa <= 1.0 + 1e-12);
    }

    #[test]
    fn classifier_is_permutation_equivariant(m in 1usize..12, seed in any::<u64>()) {
        let mut rng = supertoken::rng::SeededRng::new(seed);
        let params = ClassifierParams::init(ModelConfig { heads: 2, ..ModelConfig::new(8, 3) }, seed).unwrap();
        let features: Vec<f64> = (0..m * 8).map(|_| rng.normal()).collect();
        let tokens = SupertokenSet::new(m, 8, features, vec![1; m]).unwrap();
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.below(i + 1));
        }
        let shuffled = SupertokenSet::new(m, 8, perm.iter().flat_map(|&p| tokens.token(p).to_vec()).collect(), vec![1; m]).unwrap();
        let (base, moved) = (forward(&tokens, &params).unwrap(), forward(&shuffled, &params).unwrap());
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!(max_abs_diff(moved.row(i), base.row(p)) <= 1e-9);
            prop_assert!((base.row(p).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        for head in attention_maps(&tokens, &params).unwrap().iter().flatten() {
            for row in head.chunks(m) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
