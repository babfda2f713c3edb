mod common;

use common::oracles;

#[test]
fn slope_one_toy_is_three() {
    oracles::slope_one_toy_is_three();
}

#[test]
fn zero_reg_als_matches_least_squares() {
    oracles::zero_reg_als_matches_least_squares();
}

#[test]
fn knn_with_all_neighbors_matches_brute_force() {
    oracles::knn_with_all_neighbors_matches_brute_force();
}

#[test]
fn metrics_match_direct_formulas() {
    oracles::metrics_match_direct_formulas();
}
