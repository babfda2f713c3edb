//! Independent reference computations checked against the library. Each
//! check panics on mismatch.

use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use autorec::algorithms::{self, fit_baselines, BaselineMethod, Trainset};
use autorec::metrics::{mae, rmse};
use autorec::{AlgorithmSpec, ParamAssignment, RatingScale, RatingsTable};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scale() -> RatingScale {
    RatingScale::new(1.0, 5.0).unwrap()
}

fn table(triples: &[(&str, &str, f64)]) -> RatingsTable {
    RatingsTable::from_triples(
        triples.iter().map(|&(u, i, r)| (u.to_owned(), i.to_owned(), r)),
        scale(),
    )
    .unwrap()
}

pub fn slope_one_toy_is_three() {
    let t = table(&[("A", "i", 2.0), ("A", "j", 1.0), ("B", "i", 4.0), ("B", "j", 3.0), ("C", "j", 2.0)]);
    let train = Trainset::from_table(&t);
    let model = algorithms::fit(AlgorithmSpec::SlopeOne, &ParamAssignment::new(), &train, 0).unwrap();
    let p = model.score(t.user_inner("C"), t.item_inner("i"));
    assert!(!p.was_impossible);
    assert_abs_diff_eq!(p.value, 3.0, epsilon = 1e-12);
}

pub fn zero_reg_als_matches_least_squares() {
    let t = table(&[("A", "x", 5.0), ("A", "y", 4.0), ("B", "x", 3.0)]);
    let train = Trainset::from_table(&t);
    let method = BaselineMethod::Als {
        epochs: 50,
        reg_u: 0.0,
        reg_i: 0.0,
    };
    let b = fit_baselines(&train, &method);

    // unknowns [b_A, b_B, b_x, b_y]; one row per rating
    let users = ["A", "B"];
    let items = ["x", "y"];
    let rows = [("A", "x", 5.0), ("A", "y", 4.0), ("B", "x", 3.0)];
    let mu = 4.0;
    let mut x = DMatrix::<f64>::zeros(rows.len(), 4);
    let mut y = DVector::<f64>::zeros(rows.len());
    for (k, (u, i, r)) in rows.iter().enumerate() {
        x[(k, users.iter().position(|v| v == u).unwrap())] = 1.0;
        x[(k, 2 + items.iter().position(|v| v == i).unwrap())] = 1.0;
        y[k] = r - mu;
    }
    // the system is rank deficient; the minimum-norm solution fixes the
    // fitted values, which are identified
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let solution = xtx.clone().pseudo_inverse(1e-12).unwrap() * &xty;
    assert!((&xtx * &solution - &xty).norm() < 1e-12);

    assert_abs_diff_eq!(b.mu, mu, epsilon = 1e-12);
    let lib = DVector::from_vec(vec![
        b.user_bias(t.user_inner("A").unwrap()),
        b.user_bias(t.user_inner("B").unwrap()),
        b.item_bias(t.item_inner("x").unwrap()),
        b.item_bias(t.item_inner("y").unwrap()),
    ]);
    // the library's biases satisfy the normal equations
    assert!((&xtx * &lib - &xty).norm() < 1e-6);
    for (ui, u) in users.iter().enumerate() {
        for (ii, i) in items.iter().enumerate() {
            let want = mu + solution[ui] + solution[2 + ii];
            let got = b.estimate(t.user_inner(u).unwrap(), t.item_inner(i).unwrap());
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
    }
    // the unobserved cell is pinned down too: 4 + (-1) + 0 - 1 = 2
    assert_abs_diff_eq!(b.estimate(t.user_inner("B").unwrap(), t.item_inner("y").unwrap()), 2.0, epsilon = 1e-6);
}

type Rows = BTreeMap<usize, BTreeMap<usize, f64>>;

fn brute_sim(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>, kind: &str) -> f64 {
    let common: Vec<(f64, f64)> = a.iter().filter_map(|(p, &ra)| b.get(p).map(|&rb| (ra, rb))).collect();
    if common.is_empty() {
        return 0.0;
    }
    let n = common.len() as f64;
    let s = match kind {
        "cosine" => {
            let dot: f64 = common.iter().map(|(x, y)| x * y).sum();
            let na: f64 = common.iter().map(|(x, _)| x * x).sum::<f64>().sqrt();
            let nb: f64 = common.iter().map(|(_, y)| y * y).sum::<f64>().sqrt();
            if na * nb == 0.0 {
                0.0
            } else {
                dot / (na * nb)
            }
        }
        "msd" => 1.0 / (common.iter().map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n + 1.0),
        "pearson" => {
            let ma = common.iter().map(|c| c.0).sum::<f64>() / n;
            let mb = common.iter().map(|c| c.1).sum::<f64>() / n;
            let cov: f64 = common.iter().map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = common.iter().map(|(x, _)| (x - ma).powi(2)).sum();
            let vb: f64 = common.iter().map(|(_, y)| (y - mb).powi(2)).sum();
            if va * vb < 1e-18 {
                0.0
            } else {
                cov / (va * vb).sqrt()
            }
        }
        _ => unreachable!(),
    };
    s.clamp(-1.0, 1.0)
}

fn mean_sd(row: &BTreeMap<usize, f64>) -> (f64, f64) {
    let n = row.len() as f64;
    let m = row.values().sum::<f64>() / n;
    (m, (row.values().map(|r| (r - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Weighted aggregation over every positive-similarity entity that rated `y`.
fn brute_knn(rows: &Rows, x: usize, y: usize, kind: &str, variant: AlgorithmSpec, global_mean: f64) -> f64 {
    let (mx, sx) = mean_sd(&rows[&x]);
    let nbrs: Vec<(f64, f64, f64, f64)> = rows
        .iter()
        .filter(|(&e, row)| e != x && row.contains_key(&y))
        .map(|(_, row)| {
            let (m, sd) = mean_sd(row);
            (brute_sim(&rows[&x], row, kind), row[&y], m, sd)
        })
        .filter(|n| n.0 > 0.0)
        .collect();
    let est = if nbrs.is_empty() {
        match variant {
            AlgorithmSpec::KnnBasic => global_mean,
            _ => mx,
        }
    } else {
        let w: f64 = nbrs.iter().map(|n| n.0).sum();
        match variant {
            AlgorithmSpec::KnnBasic => nbrs.iter().map(|n| n.0 * n.1).sum::<f64>() / w,
            AlgorithmSpec::KnnWithMeans => mx + nbrs.iter().map(|n| n.0 * (n.1 - n.2)).sum::<f64>() / w,
            AlgorithmSpec::KnnWithZScore => {
                let z: f64 = nbrs
                    .iter()
                    .map(|n| n.0 * (n.1 - n.2) / if n.3 > 0.0 { n.3 } else { 1.0 })
                    .sum();
                mx + sx * z / w
            }
            _ => unreachable!(),
        }
    };
    est.clamp(1.0, 5.0)
}

pub fn knn_with_all_neighbors_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n_users, n_items) = (18usize, 12usize);
    let mut triples = Vec::new();
    let mut held_out = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            // the first item and user are always rated so every id exists
            if u == 0 || i == 0 || rng.random_bool(0.55) {
                triples.push((format!("u{u}"), format!("i{i}"), f64::from(rng.random_range(1..=5u8))));
            } else {
                held_out.push((u, i));
            }
        }
    }
    let t = RatingsTable::from_triples(triples.clone(), scale()).unwrap();
    let train = Trainset::from_table(&t);
    let uid = |u: usize| t.user_inner(&format!("u{u}")).unwrap();
    let iid = |i: usize| t.item_inner(&format!("i{i}")).unwrap();

    let mut by_user = Rows::new();
    let mut by_item = Rows::new();
    for (u, i, r) in &triples {
        let (u, i) = (u[1..].parse().unwrap(), i[1..].parse().unwrap());
        by_user.entry(u).or_default().insert(i, *r);
        by_item.entry(i).or_default().insert(u, *r);
    }
    let global_mean = triples.iter().map(|t| t.2).sum::<f64>() / triples.len() as f64;

    let mut checked = 0;
    for variant in [AlgorithmSpec::KnnBasic, AlgorithmSpec::KnnWithMeans, AlgorithmSpec::KnnWithZScore] {
        for kind in ["cosine", "msd", "pearson"] {
            for user_based in [true, false] {
                let params = ParamAssignment::new()
                    .with("k", 100)
                    .with("min_k", 1)
                    .with("sim", kind)
                    .with("user_based", if user_based { "true" } else { "false" });
                let model = algorithms::fit(variant, &params, &train, 0).unwrap();
                for &(u, i) in &held_out {
                    let want = if user_based {
                        brute_knn(&by_user, u, i, kind, variant, global_mean)
                    } else {
                        brute_knn(&by_item, i, u, kind, variant, global_mean)
                    };
                    let got = model.score(Some(uid(u)), Some(iid(i))).value;
                    assert_abs_diff_eq!(got, want, epsilon = 1e-9);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}

pub fn metrics_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in [1usize, 2, 17, 1000] {
        let pairs: Vec<(f64, f64)> = (0..len)
            .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let mut sq = 0.0;
        let mut ab = 0.0;
        for &(p, a) in &pairs {
            sq += (p - a) * (p - a);
            ab += (p - a).abs();
        }
        let n = len as f64;
        assert_abs_diff_eq!(rmse(&pairs).unwrap(), (sq / n).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(mae(&pairs).unwrap(), ab / n, epsilon = 1e-12);
    }
}
