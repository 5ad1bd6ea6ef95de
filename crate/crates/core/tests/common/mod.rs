//! Brute-force reference implementations. They work on plain nested
//! vectors and share no code with the library's similarity frames,
//! imputation or prediction paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use studyrec_core::ratings::{Rating, RatingsMatrix};
use studyrec_core::similarity::SimilarityMetric;

pub type Grid = Vec<Vec<Option<f64>>>;

pub fn to_grid(m: &RatingsMatrix) -> Grid {
    m.rows()
        .map(|r| r.iter().map(|c| c.map(Rating::as_f64)).collect())
        .collect()
}

pub fn transpose(g: &Grid) -> Grid {
    let cols = g.first().map_or(0, Vec::len);
    (0..cols).map(|c| g.iter().map(|row| row[c]).collect()).collect()
}

fn avg(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        Some(s / values.len() as f64)
    }
}

/// Fills each row's gaps with that row's mean, or the grid mean if the row
/// is empty. `None` when the grid holds no value at all.
pub fn fill_rows(g: &Grid) -> Option<Vec<Vec<f64>>> {
    let everything: Vec<f64> = g.iter().flatten().flatten().copied().collect();
    let global = avg(&everything)?;
    Some(
        g.iter()
            .map(|row| {
                let present: Vec<f64> = row.iter().flatten().copied().collect();
                let fill = avg(&present).unwrap_or(global);
                row.iter().map(|c| c.unwrap_or(fill)).collect()
            })
            .collect(),
    )
}

pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..x.len() {
        if let (Some(a), Some(b)) = (x[i], y[i]) {
            xs.push(a);
            ys.push(b);
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let mx = avg(&xs).unwrap();
    let my = avg(&ys).unwrap();
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    for i in 0..xs.len() {
        num += (xs[i] - mx) * (ys[i] - my);
        dx2 += (xs[i] - mx) * (xs[i] - mx);
        dy2 += (ys[i] - my) * (ys[i] - my);
    }
    if dx2 == 0.0 || dy2 == 0.0 {
        return None;
    }
    Some((num / (dx2 * dy2).sqrt()).clamp(-1.0, 1.0))
}

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - y[i]) * (x[i] - y[i]);
    }
    s.sqrt()
}

pub fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for i in 0..x.len() {
        dot += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    if xx == 0.0 || yy == 0.0 {
        None
    } else {
        Some((1.0 - dot / (xx * yy).sqrt()).clamp(0.0, 2.0))
    }
}

/// All-pairs score of `query` against every row in `candidates`, sorted
/// closest first (ties by index), truncated to `n`.
pub fn brute_neighbors(
    rows: &Grid,
    query: usize,
    candidates: &[usize],
    metric: SimilarityMetric,
    n: usize,
) -> Vec<(usize, f64)> {
    let filled = fill_rows(rows);
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for &c in candidates {
        if c == query {
            continue;
        }
        let s = match metric {
            SimilarityMetric::Pearson => pearson(&rows[query], &rows[c]),
            SimilarityMetric::Euclidean => filled.as_ref().map(|f| euclidean(&f[query], &f[c])),
            SimilarityMetric::Cosine => filled.as_ref().and_then(|f| cosine(&f[query], &f[c])),
        };
        if let Some(s) = s {
            scored.push((c, s));
        }
    }
    // insertion sort keeps this independent of the library's comparator
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 && closer(metric, scored[j], scored[j - 1]) {
            scored.swap(j, j - 1);
            j -= 1;
        }
    }
    scored.truncate(n);
    scored
}

fn closer(metric: SimilarityMetric, a: (usize, f64), b: (usize, f64)) -> bool {
    if a.1 == b.1 {
        return a.0 < b.0;
    }
    match metric {
        SimilarityMetric::Pearson => a.1 > b.1,
        _ => a.1 < b.1,
    }
}

fn fallback(train: &Grid, item: usize) -> f64 {
    let column: Vec<f64> = train.iter().filter_map(|r| r[item]).collect();
    let all: Vec<f64> = train.iter().flatten().flatten().copied().collect();
    avg(&column).unwrap_or_else(|| avg(&all).unwrap())
}

fn finish(values: &[f64], train: &Grid, item: usize) -> (f64, bool) {
    match avg(values) {
        Some(v) => (v.clamp(0.0, 5.0), true),
        None => (fallback(train, item), false),
    }
}

/// Reference user-based prediction for each test item, with whether any
/// neighbor contributed.
pub fn user_based(
    train: &Grid,
    user: &[Option<f64>],
    test_items: &[usize],
    metric: SimilarityMetric,
    n: usize,
) -> Vec<(f64, bool)> {
    let n_items = user.len();
    let known: Vec<usize> = (0..n_items).filter(|i| !test_items.contains(i)).collect();
    let mut frame: Grid = train.iter().map(|r| known.iter().map(|&i| r[i]).collect()).collect();
    frame.push(known.iter().map(|&i| user[i]).collect());
    let query = train.len();
    let candidates: Vec<usize> = (0..train.len()).collect();
    let neighbors = brute_neighbors(&frame, query, &candidates, metric, n);
    test_items
        .iter()
        .map(|&t| {
            let values: Vec<f64> = neighbors.iter().filter_map(|(u, _)| train[*u][t]).collect();
            finish(&values, train, t)
        })
        .collect()
}

/// Reference item-based prediction for each test item.
pub fn item_based(
    train: &Grid,
    user: &[Option<f64>],
    test_items: &[usize],
    metric: SimilarityMetric,
    n: usize,
) -> Vec<(f64, bool)> {
    let n_items = user.len();
    let masked: Vec<Option<f64>> = (0..n_items)
        .map(|i| if test_items.contains(&i) { None } else { user[i] })
        .collect();
    let mut with_user = train.clone();
    with_user.push(masked.clone());
    let columns = transpose(&with_user);
    let known: Vec<usize> = (0..n_items).filter(|i| !test_items.contains(i)).collect();
    test_items
        .iter()
        .map(|&t| {
            let neighbors = brute_neighbors(&columns, t, &known, metric, n);
            let values: Vec<f64> = neighbors.iter().filter_map(|(i, _)| masked[*i]).collect();
            finish(&values, train, t)
        })
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n_users: usize, n_items: usize, missing: f64) -> RatingsMatrix {
    let cells = (0..n_users * n_items)
        .map(|_| {
            if rng.random::<f64>() < missing {
                None
            } else {
                Some(Rating::new(rng.random_range(0..=5)).unwrap())
            }
        })
        .collect();
    RatingsMatrix::new(
        (0..n_users).map(|u| format!("u{u}")).collect(),
        (0..n_items).map(|i| format!("i{i}")).collect(),
        cells,
    )
    .unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A prediction case: training matrix, test user row and test items.
pub struct PredictionCase {
    pub train: RatingsMatrix,
    pub user: Vec<Option<Rating>>,
    pub test_items: Vec<usize>,
    pub n: usize,
}

/// Cases up to 12 users x 8 items with at most 30% missing cells.
pub fn prediction_case(seed: u64) -> PredictionCase {
    let mut rng = seeded(seed);
    loop {
        let n_users = rng.random_range(3..=12);
        let n_items = rng.random_range(3..=8);
        let missing = rng.random_range(0.0..0.3);
        let full = random_matrix(&mut rng, n_users + 1, n_items, missing);
        let train = full.select_users(&(0..n_users).collect::<Vec<_>>());
        if train.global_mean().is_none() {
            continue;
        }
        let user = full.row(n_users).to_vec();
        let n_test = rng.random_range(1..n_items);
        let mut items: Vec<usize> = (0..n_items).collect();
        for i in 0..n_test {
            let j = rng.random_range(i..n_items);
            items.swap(i, j);
        }
        let mut test_items = items[..n_test].to_vec();
        test_items.sort_unstable();
        let n = rng.random_range(1..=n_users + 1);
        return PredictionCase {
            train,
            user,
            test_items,
            n,
        };
    }
}

fn compare_neighbors(label: &str, got: Vec<(usize, f64)>, want: &[(usize, f64)]) -> Result<(), String> {
    let same_order = got.iter().map(|g| g.0).eq(want.iter().map(|w| w.0));
    let close = got.iter().zip(want).all(|(g, w)| (g.1 - w.1).abs() <= 1e-12);
    if same_order && close {
        Ok(())
    } else {
        Err(format!("{label}: got {got:?}, oracle {want:?}"))
    }
}

/// Checks every metric, both axes and every query on one random matrix up to
/// 20 x 15 against the brute-force ranking.
pub fn check_similarity_case(seed: u64) -> Result<(), String> {
    use studyrec_core::similarity::{compute_similarities, SimilarityFrame};

    let mut rng = seeded(seed);
    let n_users = rng.random_range(2..=20);
    let n_items = rng.random_range(2..=15);
    let missing = rng.random_range(0.0..0.5);
    let m = random_matrix(&mut rng, n_users, n_items, missing);
    let by_user = to_grid(&m);
    let by_item = transpose(&by_user);
    for metric in SimilarityMetric::ALL {
        for (axis, rows) in [("users", &by_user), ("items", &by_item)] {
            let frame = if axis == "users" {
                SimilarityFrame::over_users(&m, metric)
            } else {
                SimilarityFrame::over_items(&m, metric)
            }
            .map_err(|e| e.to_string())?;
            let all: Vec<usize> = (0..rows.len()).collect();
            for query in 0..rows.len() {
                let n = rng.random_range(1..=rows.len());
                let want = brute_neighbors(rows, query, &all, metric, n);
                let got = match compute_similarities(&frame, query, n) {
                    Ok(set) => set.entries.iter().map(|e| (e.index, e.score)).collect(),
                    Err(_) => Vec::new(),
                };
                compare_neighbors(&format!("seed {seed} {metric} {axis} query {query} n {n}"), got, &want)?;
            }
        }
    }
    Ok(())
}

fn compare_predictions(
    label: &str,
    list: &studyrec_core::RecommendationList,
    items: &[String],
    test_items: &[usize],
    want: &[(f64, bool)],
    neighbor_source: studyrec_core::predict::PredictionSource,
) -> Result<(), String> {
    use studyrec_core::predict::PredictionSource;

    if list.len() != test_items.len() {
        return Err(format!(
            "{label}: {} predictions for {} test items",
            list.len(),
            test_items.len()
        ));
    }
    for (&t, &(value, from_neighbors)) in test_items.iter().zip(want) {
        let rec = list
            .get(&items[t])
            .ok_or_else(|| format!("{label}: no prediction for item {t}"))?;
        let source = if from_neighbors {
            neighbor_source
        } else {
            PredictionSource::Fallback
        };
        if (rec.predicted_rating - value).abs() > 1e-12 || rec.source != source {
            return Err(format!(
                "{label}: item {t} got {} ({:?}), oracle {value} ({source:?})",
                rec.predicted_rating, rec.source
            ));
        }
    }
    Ok(())
}

/// Checks user-based and item-based predictions for one random case against
/// the oracle, for every metric.
pub fn check_prediction_case(seed: u64) -> Result<(), String> {
    use studyrec_core::predict::PredictionSource;
    use studyrec_core::{predict_item_based, predict_user_based};

    let case = prediction_case(seed);
    let train = to_grid(&case.train);
    let user: Vec<Option<f64>> = case.user.iter().map(|c| c.map(Rating::as_f64)).collect();
    let items = case.train.items();
    for metric in SimilarityMetric::ALL {
        let label = format!("seed {seed} {metric} n {}", case.n);
        let got = predict_user_based(&case.user, &case.train, &case.test_items, metric, case.n)
            .map_err(|e| format!("{label}: {e}"))?;
        let want = user_based(&train, &user, &case.test_items, metric, case.n);
        compare_predictions(
            &format!("{label} user-based"),
            &got,
            items,
            &case.test_items,
            &want,
            PredictionSource::UserBased,
        )?;

        let got = predict_item_based(&case.user, &case.train, &case.test_items, metric, case.n)
            .map_err(|e| format!("{label}: {e}"))?;
        let want = item_based(&train, &user, &case.test_items, metric, case.n);
        compare_predictions(
            &format!("{label} item-based"),
            &got,
            items,
            &case.test_items,
            &want,
            PredictionSource::ItemBased,
        )?;
    }
    Ok(())
}

/// Hybrid at alpha 1 and alpha 0 must equal the pure user-based and
/// item-based predictions exactly.
pub fn check_hybrid_endpoints(seed: u64) -> Result<(), String> {
    use studyrec_core::predict::HybridConfig;
    use studyrec_core::{predict_hybrid, predict_item_based, predict_user_based};

    let case = prediction_case(seed);
    for metric in SimilarityMetric::ALL {
        let user =
            predict_user_based(&case.user, &case.train, &case.test_items, metric, case.n).map_err(|e| e.to_string())?;
        let item =
            predict_item_based(&case.user, &case.train, &case.test_items, metric, case.n).map_err(|e| e.to_string())?;
        for (alpha, pure) in [(1.0, &user), (0.0, &item)] {
            let config = HybridConfig::new(metric, case.n, alpha).map_err(|e| e.to_string())?;
            let hybrid =
                predict_hybrid(&case.user, &case.train, &case.test_items, &config).map_err(|e| e.to_string())?;
            let same = hybrid.entries.len() == pure.entries.len()
                && hybrid.entries.iter().zip(&pure.entries).all(|(h, p)| {
                    h.item_id == p.item_id && h.predicted_rating.to_bits() == p.predicted_rating.to_bits()
                });
            if !same {
                return Err(format!("seed {seed} {metric} alpha {alpha}: {hybrid:?} vs {pure:?}"));
            }
        }
    }
    Ok(())
}
