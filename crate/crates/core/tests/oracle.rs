mod common;

use common::*;
use studyrec_core::similarity::SimilarityMetric;

#[test]
fn neighbor_rankings_match_brute_force() {
    for seed in 0..200 {
        check_similarity_case(seed).unwrap();
    }
}

#[test]
fn predictions_match_brute_force() {
    for seed in 1000..1100 {
        check_prediction_case(seed).unwrap();
    }
}

#[test]
fn hybrid_endpoints_are_pure_components() {
    for seed in 1000..1100 {
        check_hybrid_endpoints(seed).unwrap();
    }
}

#[test]
fn oracle_agrees_with_hand_worked_example() {
    // users a and b agree on the known items, c is reversed
    let train = vec![
        vec![Some(5.0), Some(4.0), Some(1.0), Some(4.0)],
        vec![Some(4.0), Some(5.0), Some(2.0), Some(3.0)],
        vec![Some(1.0), Some(2.0), Some(5.0), Some(0.0)],
    ];
    let user = vec![Some(5.0), Some(5.0), Some(1.0), Some(2.0)];
    let got = user_based(&train, &user, &[3], SimilarityMetric::Pearson, 2);
    // c is anti-correlated and ranks last, so a and b are used
    assert_eq!(got, vec![(3.5, true)]);
    let got = item_based(&train, &user, &[3], SimilarityMetric::Euclidean, 1);
    // column 3 filled with its mean 7/3 sits closest to column 0, rated 5
    assert_eq!(got, vec![(5.0, true)]);
}

#[test]
fn oracle_falls_back_to_global_mean() {
    let train = vec![vec![Some(2.0), None], vec![Some(4.0), None]];
    let user = vec![None, None];
    // no overlap anywhere, column 1 empty: global train mean
    assert_eq!(
        user_based(&train, &user, &[1], SimilarityMetric::Pearson, 1),
        vec![(3.0, false)]
    );
}
