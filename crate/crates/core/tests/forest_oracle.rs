//! Random forest against an exhaustive split search, plus fit and determinism checks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seal_core::classify::{train_forest, ClassifierConfig, TreeNode};
use seal_core::KeyClass;

fn gini(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let n = labels.len() as f64;
    let mut c = [0.0f64; 3];
    for &y in labels {
        c[y] += 1.0;
    }
    1.0 - c.iter().map(|k| (k / n).powi(2)).sum::<f64>()
}

fn weighted_gini(x: &Array2<f32>, y: &[usize], feature: usize, threshold: f32) -> f64 {
    let (mut l, mut r) = (Vec::new(), Vec::new());
    for (i, &label) in y.iter().enumerate() {
        if x[[i, feature]] <= threshold {
            l.push(label);
        } else {
            r.push(label);
        }
    }
    let n = y.len() as f64;
    (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n
}

/// Minimum weighted Gini over every feature and every cut between distinct values.
fn oracle(x: &Array2<f32>, y: &[usize]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..x.ncols() {
        let mut vals: Vec<f32> = x.column(f).to_vec();
        vals.sort_by(f32::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let g = weighted_gini(x, y, f, w[0]);
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
    }
    best
}

fn stump(d: usize) -> ClassifierConfig {
    ClassifierConfig {
        n_trees: 1,
        max_depth: 1,
        features_per_split: Some(d),
        bootstrap: false,
        ..Default::default()
    }
}

#[test]
fn stump_matches_exhaustive_gini_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..100 {
        let n = rng.gen_range(2..40);
        let d = rng.gen_range(1..6);
        // coarse grid so ties between values are common
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(0..8) as f32 * 0.5);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let classes: Vec<KeyClass> = y.iter().map(|&c| KeyClass::from_index(c).unwrap()).collect();
        let forest = train_forest(x.view(), &classes, &stump(d)).unwrap();
        let tree = &forest.trees[0];
        let pure = y.iter().all(|&c| c == y[0]);
        match (tree.node(0), oracle(&x, &y)) {
            (TreeNode::Internal { feature_index, threshold, .. }, Some(best)) => {
                assert!(!pure, "dataset {k}: split a pure node");
                let got = weighted_gini(&x, &y, feature_index, threshold);
                assert!((got - best).abs() < 1e-12, "dataset {k}: {got} vs oracle {best}");
                assert!(x.column(feature_index).iter().any(|&v| v <= threshold));
                assert!(x.column(feature_index).iter().any(|&v| v > threshold));
            }
            (TreeNode::Leaf { .. }, best) => {
                assert!(pure || best.is_none(), "dataset {k}: no split chosen but oracle found {best:?}");
            }
            (TreeNode::Internal { .. }, None) => panic!("dataset {k}: split on constant features"),
        }
    }
}

#[test]
fn separable_data_is_fit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 300;
    let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0f32..1.0));
    let y: Vec<KeyClass> = x
        .rows()
        .into_iter()
        .map(|r| {
            if r[0] + 0.5 * r[1] > 0.3 {
                KeyClass::Task
            } else if r[2] > 0.0 {
                KeyClass::Process
            } else {
                KeyClass::Material
            }
        })
        .collect();
    let config = ClassifierConfig {
        n_trees: 25,
        ..Default::default()
    };
    let forest = train_forest(x.view(), &y, &config).unwrap();
    let pred = forest.predict_rows(x.view()).unwrap();
    let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
    assert_eq!(correct, n, "training accuracy {}", correct as f64 / n as f64);
}

#[test]
fn fixed_seed_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = Array2::from_shape_fn((200, 9), |_| rng.gen_range(-1.0f32..1.0));
    let y: Vec<KeyClass> = (0..200).map(|_| KeyClass::ALL[rng.gen_range(0..3)]).collect();
    let config = ClassifierConfig {
        n_trees: 20,
        ..Default::default()
    };
    let a = train_forest(x.view(), &y, &config).unwrap();
    let b = train_forest(x.view(), &y, &config).unwrap();
    assert_eq!(a, b);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = single.install(|| train_forest(x.view(), &y, &config).unwrap());
    assert_eq!(a, c);
    let other = train_forest(x.view(), &y, &ClassifierConfig { seed: 43, ..config }).unwrap();
    assert_ne!(a, other);
}
