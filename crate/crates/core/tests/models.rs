mod common;

use common::{anova, close, knn_vote, rng};
use ndarray::{array, Array2, Axis};
use portscope::classifiers::{predict_with_rejection, ForestConfig, ForestModel, KnnModel};
use portscope::dataset::LabeledDataset;
use portscope::scaling::{scaler_fit, ScalerKind};
use portscope::selection::{anova_f_scores, select_k_best_fit};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |(_, j)| {
        let scale = 10f64.powi(j as i32 % 5 - 2);
        (r.random::<f64>() * 2.0 - 1.0) * scale + j as f64
    })
}

fn labels_cycle(n: usize, classes: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{}", i % classes)).collect()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

#[test]
fn standard_scaler_centres_and_whitens() {
    let mut x = random_matrix(1, 300, 8);
    x.column_mut(3).fill(7.5);
    let out = scaler_fit(ScalerKind::Standard, &x).unwrap().transform(&x).unwrap();
    for (j, col) in out.axis_iter(Axis(1)).enumerate() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if j == 3 {
            assert!(col.iter().all(|v| *v == 0.0));
            continue;
        }
        assert!(mean.abs() <= 1e-9, "col {j} mean {mean}");
        assert!((std - 1.0).abs() <= 1e-9, "col {j} std {std}");
    }
    let two = scaler_fit(ScalerKind::Standard, &array![[1.0], [3.0]]).unwrap();
    assert_eq!(two.transform(&array![[1.0], [3.0]]).unwrap(), array![[-1.0], [1.0]]);
}

#[test]
fn normalizer_gives_unit_rows() {
    let mut x = random_matrix(2, 200, 6);
    x.row_mut(7).fill(0.0);
    let out = scaler_fit(ScalerKind::Normalizer, &x).unwrap().transform(&x).unwrap();
    for (i, row) in out.axis_iter(Axis(0)).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if i == 7 {
            assert_eq!(norm, 0.0);
        } else {
            assert!((norm - 1.0).abs() <= 1e-12, "row {i} norm {norm}");
        }
    }
    let m = scaler_fit(ScalerKind::Normalizer, &array![[3.0, 4.0]]).unwrap();
    let r = m.transform_row(&[3.0, 4.0]).unwrap();
    assert!((r[0] - 0.6).abs() < 1e-15 && (r[1] - 0.8).abs() < 1e-15);
}

#[test]
fn quantile_scaler_is_bounded_monotone_and_uniform() {
    let mut r = rng(3);
    let normal = Normal::new(5.0f64, 2.0).unwrap();
    let x = Array2::from_shape_fn((1000, 3), |(_, j)| normal.sample(&mut r).powi(j as i32 + 1));
    let model = scaler_fit(ScalerKind::Quantile, &x).unwrap();
    let out = model.transform(&x).unwrap();
    assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));

    for (j, col) in out.axis_iter(Axis(1)).enumerate() {
        let mut u = col.to_vec();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "feature {j}: KS {ks}");
    }

    // a sweep beyond the training range stays in [0,1] and never decreases
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 10.0;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0;
    let mut prev = vec![f64::NEG_INFINITY; 3];
    for s in 0..=5000 {
        let v = lo + (hi - lo) * s as f64 / 5000.0;
        let row = model.transform_row(&[v, v, v]).unwrap();
        for j in 0..3 {
            assert!((0.0..=1.0).contains(&row[j]));
            assert!(row[j] >= prev[j], "feature {j} decreased at {v}");
            prev[j] = row[j];
        }
    }
}

#[test]
fn minmax_and_maxabs_hand_values() {
    let x = array![[-4.0, 2.0], [2.0, 6.0], [0.0, 4.0]];
    let mm = scaler_fit(ScalerKind::MinMax, &x).unwrap().transform(&x).unwrap();
    assert_eq!(mm, array![[0.0, 0.0], [1.0, 1.0], [4.0 / 6.0, 0.5]]);
    let ma = scaler_fit(ScalerKind::MaxAbs, &x).unwrap().transform(&x).unwrap();
    assert_eq!(ma.column(0).to_vec(), vec![-1.0, 0.5, 0.0]);
}

#[test]
fn scalers_handle_constant_columns_and_commute_with_row_order() {
    let mut x = random_matrix(4, 60, 5);
    x.column_mut(1).fill(-3.0);
    let mut perm: Vec<usize> = (0..60).collect();
    perm.shuffle(&mut rng(9));
    let px = x.select(Axis(0), &perm);
    for kind in ScalerKind::ALL {
        let model = scaler_fit(kind, &x).unwrap();
        let out = model.transform(&x).unwrap();
        assert!(out.iter().all(|v| v.is_finite()), "{kind}");
        if kind != ScalerKind::Normalizer {
            let c = out.column(1);
            assert!(c.iter().all(|v| *v == c[0]), "{kind}: constant column");
        }
        assert_eq!(model.transform(&px).unwrap(), out.select(Axis(0), &perm), "{kind}");
        // refitting on shuffled rows only changes summation order
        let refit = scaler_fit(kind, &px).unwrap().transform(&px).unwrap();
        for (a, b) in refit.iter().zip(out.select(Axis(0), &perm).iter()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{kind}: {a} vs {b}");
        }
        assert!(model.transform(&random_matrix(5, 3, 4)).is_err());
    }
    assert!(scaler_fit(ScalerKind::Standard, &Array2::zeros((0, 3))).is_err());
}

#[test]
fn anova_matches_exact_reference() {
    for seed in 0..5 {
        let mut r = rng(10 + seed);
        let classes = 3 + seed as usize;
        let labels = labels_cycle(120, classes);
        // large offsets and small spreads are where naive sums lose digits
        let ints: Vec<Vec<i64>> = (0..120)
            .map(|i| {
                (0..12)
                    .map(|j| {
                        let offset = 10i64.pow(j as u32 % 7);
                        offset + r.random_range(0..50) + (i % classes) as i64 * (j as i64 % 3)
                    })
                    .collect()
            })
            .collect();
        let x = Array2::from_shape_fn((120, 12), |(i, j)| ints[i][j] as f64);
        let data = LabeledDataset::from_rows(x, labels.clone(), names(12)).unwrap();
        let got = anova_f_scores(&data).unwrap();
        let want = anova(&ints, &labels);
        for (j, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(close(*g, *w, 1e-9, 0.0), "seed {seed} col {j}: {g} vs {w}");
        }
    }
}

#[test]
fn anova_degenerate_columns() {
    let x = array![[1.0, 5.0, 0.0], [1.0, 5.0, 0.1], [1.0, 9.0, 0.3], [1.0, 9.0, 0.2]];
    let labels = vec!["a".into(), "a".into(), "b".into(), "b".into()];
    let data = LabeledDataset::from_rows(x, labels, names(3)).unwrap();
    let f = anova_f_scores(&data).unwrap();
    assert_eq!(f[0], 0.0);
    assert_eq!(f[1], f64::INFINITY);
    let sel = select_k_best_fit(&data, 1).unwrap();
    assert_eq!(sel.selected_indices, vec![1]);
    let all = select_k_best_fit(&data, 10).unwrap();
    assert_eq!(all.selected_indices, vec![0, 1, 2]);
}

#[test]
fn planted_feature_ranks_first() {
    let mut r = rng(21);
    let n = 200;
    let labels = labels_cycle(n, 2);
    let x = Array2::from_shape_fn((n, 51), |(i, j)| {
        let noise = r.random::<f64>();
        if j == 37 {
            (i % 2) as f64 + 0.01 * noise
        } else {
            noise
        }
    });
    let data = LabeledDataset::from_rows(x.clone(), labels, names(51)).unwrap();
    let sel = select_k_best_fit(&data, 1).unwrap();
    assert_eq!(sel.selected_indices, vec![37]);
    let five = select_k_best_fit(&data, 5).unwrap();
    assert!(five.selected_indices.windows(2).all(|w| w[0] < w[1]));
    let reduced = five.transform(&x).unwrap();
    for (k, &j) in five.selected_indices.iter().enumerate() {
        assert_eq!(reduced.column(k), x.column(j));
    }
}

fn knn_problem(seed: u64, rows: usize) -> (Array2<f64>, Vec<String>) {
    let x = random_matrix(seed, rows, 6);
    let labels = (0..rows).map(|i| format!("k{}", (i * 7 + i / 3) % 4)).collect();
    (x, labels)
}

#[test]
fn knn_matches_exhaustive_scan() {
    let (x, labels) = knn_problem(30, 500);
    let train = to_rows(&x);
    let queries = random_matrix(31, 200, 6);
    for k in [1, 5, 8] {
        let model = KnnModel::fit(&x, &labels, k, 2.0).unwrap();
        for q in queries.axis_iter(Axis(0)) {
            let q = q.to_vec();
            let (probs, winner) = model.vote(&q).unwrap();
            let (want_probs, want_winner) = knn_vote(&train, &labels, &q, k);
            assert_eq!(winner, want_winner);
            assert_eq!(probs, want_probs);
            for (i, d) in model.neighbors(&q).unwrap() {
                let direct = train[i].iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!((d - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }
    }
}

#[test]
fn knn_rejection_is_monotone_in_threshold() {
    let (x, labels) = knn_problem(32, 300);
    let model = KnnModel::fit(&x, &labels, 5, 2.0).unwrap();
    for q in random_matrix(33, 100, 6).axis_iter(Axis(0)) {
        let probs = model.predict_proba(q.as_slice().unwrap()).unwrap();
        let mut rejected = false;
        for t in 0..=20 {
            let p = predict_with_rejection(&probs, t as f64 / 20.0).unwrap();
            assert!(!(rejected && !p.is_unknown()), "UNKNOWN became known at {t}");
            rejected = p.is_unknown();
        }
    }
}

#[test]
fn knn_ignores_training_row_order() {
    let (x, labels) = knn_problem(34, 400);
    let mut perm: Vec<usize> = (0..400).collect();
    perm.shuffle(&mut rng(35));
    let px = x.select(Axis(0), &perm);
    let pl: Vec<String> = perm.iter().map(|&i| labels[i].clone()).collect();
    let a = KnnModel::fit(&x, &labels, 5, 2.0).unwrap();
    let b = KnnModel::fit(&px, &pl, 5, 2.0).unwrap();
    for q in random_matrix(36, 200, 6).axis_iter(Axis(0)) {
        let q = q.to_vec();
        assert_eq!(a.vote(&q).unwrap(), b.vote(&q).unwrap());
    }
}

#[test]
fn knn_argument_checks() {
    let x = random_matrix(37, 5, 2);
    let labels = labels_cycle(5, 2);
    assert!(KnnModel::fit(&x, &labels, 5, 2.0).is_ok());
    assert!(KnnModel::fit(&x, &labels, 6, 2.0).is_err());
    assert!(KnnModel::fit(&x, &labels, 3, 0.5).is_err());
    let m = KnnModel::fit(&x, &labels, 1, 2.0).unwrap();
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        let (probs, winner) = m.vote(row.as_slice().unwrap()).unwrap();
        assert_eq!(winner, labels[i]);
        assert_eq!(probs[&labels[i]], 1.0);
    }
    assert!(m.vote(&[1.0]).is_err());
}

#[test]
fn forest_separates_disjoint_intervals() {
    let mut r = rng(40);
    let n = 200;
    let labels = labels_cycle(n, 2);
    let x = Array2::from_shape_fn((n, 4), |(i, j)| {
        if j == 2 {
            (i % 2) as f64 * 10.0 + r.random::<f64>()
        } else {
            r.random::<f64>()
        }
    });
    let cfg = ForestConfig { n_trees: 25, seed: 7 };
    let f = ForestModel::fit(&x, &labels, &cfg).unwrap();
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        let probs = f.predict_proba(row.as_slice().unwrap()).unwrap();
        assert!((probs.values().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(probs.values().all(|p| *p >= 0.0));
        let p = predict_with_rejection(&probs, 0.0).unwrap();
        assert_eq!(p.label_str(), labels[i]);
    }
    let again = ForestModel::fit(&x, &labels, &cfg).unwrap();
    assert_eq!(f, again);
    let other = ForestModel::fit(&x, &labels, &ForestConfig { n_trees: 25, seed: 8 }).unwrap();
    assert_ne!(f.trees, other.trees);
}

#[test]
fn forest_on_one_class_is_certain() {
    let x = random_matrix(41, 30, 3);
    let labels = vec!["only".to_string(); 30];
    let f = ForestModel::fit(&x, &labels, &ForestConfig { n_trees: 5, seed: 1 }).unwrap();
    for q in random_matrix(42, 10, 3).axis_iter(Axis(0)) {
        let probs = f.predict_proba(q.as_slice().unwrap()).unwrap();
        assert_eq!(probs["only"], 1.0);
    }
}
