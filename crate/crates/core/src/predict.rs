//! User-based, item-based and weighted-hybrid rating prediction.
//!
//! Both pure predictors average plain ratings over the selected neighbors:
//! user-based takes the neighbors' ratings on the target item, item-based
//! takes the test user's own ratings on the items closest to the target.
//! When no neighbor contributes a rating the prediction falls back to the
//! item's training mean, then to the global training mean.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{LabelMapping, Rating, RatingsMatrix};
use crate::similarity::{rank_candidates, Neighbor, SimilarityFrame, SimilarityMetric};

const QUERY_USER_ID: &str = "\u{0}query";

/// One point of the model grid: similarity metric, neighbor count and the
/// user-based weight `alpha` (the item-based weight is `1 - alpha`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub metric: SimilarityMetric,
    pub n_neighbors: usize,
    pub alpha: f64,
}

impl HybridConfig {
    pub fn new(metric: SimilarityMetric, n_neighbors: usize, alpha: f64) -> Result<Self> {
        let cfg = Self {
            metric,
            n_neighbors,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 {
            return Err(Error::invalid("n_neighbors must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

impl fmt::Display for HybridConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}; n={}; alpha={}",
            self.metric,
            self.n_neighbors,
            format_alpha(self.alpha)
        )
    }
}

/// Renders a weight as a small fraction when it is one (`1/4`), otherwise
/// as a decimal.
pub fn format_alpha(alpha: f64) -> String {
    if alpha == 0.0 || alpha == 1.0 {
        return format!("{alpha}");
    }
    for den in 2..=12u32 {
        let num = (alpha * f64::from(den)).round();
        if num >= 1.0 && num < f64::from(den) && num / f64::from(den) == alpha {
            let g = gcd(num as u32, den);
            return format!("{}/{}", num as u32 / g, den / g);
        }
    }
    format!("{alpha}")
}

/// Parses `0.25` or `1/4`.
pub fn parse_alpha(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad alpha {s:?}")))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad alpha {s:?}")))?;
            n / d
        }
        None => s.parse().map_err(|_| Error::invalid(format!("bad alpha {s:?}")))?,
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!("alpha {s} outside [0, 1]")));
    }
    Ok(value)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    UserBased,
    ItemBased,
    Hybrid,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub item_id: String,
    pub item_index: usize,
    pub predicted_rating: f64,
    pub source: PredictionSource,
}

/// Predictions sorted by rating, highest first; ties by ascending item index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub entries: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn new(mut entries: Vec<Recommendation>) -> Self {
        entries.sort_by(|a, b| {
            b.predicted_rating
                .total_cmp(&a.predicted_rating)
                .then(a.item_index.cmp(&b.item_index))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&Recommendation> {
        self.entries.iter().find(|r| r.item_id == item_id)
    }

    pub fn top(&self, k: usize) -> &[Recommendation] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// A single component prediction before blending.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// False when no neighbor contributed and the fallback cascade was used.
    pub from_neighbors: bool,
}

/// Blends a user-based and an item-based estimate with weight `alpha` on
/// the user-based side.
///
/// `alpha` of exactly 1 or 0 returns the corresponding pure estimate. In
/// between, if only one side found neighbors that side is used alone.
pub fn blend(user: Estimate, item: Estimate, alpha: f64) -> (f64, PredictionSource) {
    let pure = |e: Estimate, source| {
        let source = if e.from_neighbors {
            source
        } else {
            PredictionSource::Fallback
        };
        (clamp_rating(e.value), source)
    };
    if alpha == 1.0 {
        return pure(user, PredictionSource::UserBased);
    }
    if alpha == 0.0 {
        return pure(item, PredictionSource::ItemBased);
    }
    match (user.from_neighbors, item.from_neighbors) {
        (true, true) => (
            clamp_rating(alpha * user.value + (1.0 - alpha) * item.value),
            PredictionSource::Hybrid,
        ),
        (true, false) => (clamp_rating(user.value), PredictionSource::Fallback),
        (false, _) => (clamp_rating(item.value), PredictionSource::Fallback),
    }
}

fn clamp_rating(v: f64) -> f64 {
    v.clamp(0.0, 5.0)
}

/// Component predictions for one test user at several neighbor counts,
/// computed from a single similarity ranking.
#[derive(Clone, Debug)]
pub struct ComponentEstimates {
    pub test_items: Vec<usize>,
    /// One entry per requested neighbor count: `(n, user-based, item-based)`,
    /// each estimate vector aligned with `test_items`.
    pub by_neighbors: Vec<(usize, Vec<Estimate>, Vec<Estimate>)>,
}

impl ComponentEstimates {
    pub fn for_neighbors(&self, n: usize) -> Option<(&[Estimate], &[Estimate])> {
        self.by_neighbors
            .iter()
            .find(|(k, _, _)| *k == n)
            .map(|(_, u, i)| (u.as_slice(), i.as_slice()))
    }
}

/// Validated inputs shared by the predictors.
struct Task<'a> {
    train: &'a RatingsMatrix,
    /// Test user's row with every test item masked.
    profile: Vec<Option<Rating>>,
    test_items: Vec<usize>,
    known_items: Vec<usize>,
    fallback: Vec<f64>,
}

impl<'a> Task<'a> {
    fn new(test_user: &[Option<Rating>], train: &'a RatingsMatrix, test_items: &[usize]) -> Result<Self> {
        if train.n_users() == 0 {
            return Err(Error::Empty("train matrix has no users"));
        }
        let global = train.global_mean().ok_or(Error::Empty("train matrix has no ratings"))?;
        if test_user.len() != train.n_items() {
            return Err(Error::LengthMismatch(test_user.len(), train.n_items()));
        }
        let mut is_test = vec![false; train.n_items()];
        for &t in test_items {
            if t >= train.n_items() {
                return Err(Error::invalid(format!("test item index {t} out of range")));
            }
            if std::mem::replace(&mut is_test[t], true) {
                return Err(Error::invalid(format!("test item {} listed twice", train.items()[t])));
            }
        }
        let profile = test_user
            .iter()
            .zip(&is_test)
            .map(|(r, &masked)| if masked { None } else { *r })
            .collect();
        let fallback = (0..train.n_items())
            .map(|i| train.item_mean(i).unwrap_or(global))
            .collect();
        Ok(Self {
            train,
            profile,
            test_items: test_items.to_vec(),
            known_items: (0..train.n_items()).filter(|&i| !is_test[i]).collect(),
            fallback,
        })
    }

    fn fallback(&self, item: usize) -> Estimate {
        Estimate {
            value: self.fallback[item],
            from_neighbors: false,
        }
    }

    fn estimate(&self, item: usize, ratings: impl Iterator<Item = Rating>) -> Estimate {
        let (sum, count) = ratings.fold((0.0, 0usize), |(s, c), r| (s + r.as_f64(), c + 1));
        if count == 0 {
            self.fallback(item)
        } else {
            Estimate {
                value: clamp_rating(sum / count as f64),
                from_neighbors: true,
            }
        }
    }

    /// Training users ranked by similarity to the test user, computed over the
    /// known items only.
    fn rank_users(&self, metric: SimilarityMetric) -> Vec<Neighbor> {
        let known = self.train.select_items(&self.known_items);
        let query_row: Vec<_> = self.known_items.iter().map(|&i| self.profile[i]).collect();
        let frame_matrix = known.with_user_row(QUERY_USER_ID, &query_row);
        match SimilarityFrame::over_users(&frame_matrix, metric) {
            Ok(frame) => rank_candidates(&frame, self.train.n_users(), 0..self.train.n_users()),
            Err(_) => Vec::new(),
        }
    }

    fn user_based(&self, ranked: &[Neighbor], n: usize) -> Vec<Estimate> {
        let neighbors = &ranked[..n.min(ranked.len())];
        self.test_items
            .iter()
            .map(|&item| self.estimate(item, neighbors.iter().filter_map(|nb| self.train.get(nb.index, item))))
            .collect()
    }

    fn item_frame(&self, metric: SimilarityMetric) -> Option<SimilarityFrame> {
        let frame_matrix = self.train.with_user_row(QUERY_USER_ID, &self.profile);
        SimilarityFrame::over_items(&frame_matrix, metric).ok()
    }

    fn item_based(&self, ranked: &[Neighbor], item: usize, n: usize) -> Estimate {
        let neighbors = &ranked[..n.min(ranked.len())];
        self.estimate(item, neighbors.iter().filter_map(|nb| self.profile[nb.index]))
    }

    fn into_list(self, estimates: &[Estimate], source: PredictionSource) -> RecommendationList {
        let entries = self
            .test_items
            .iter()
            .zip(estimates)
            .map(|(&item, e)| Recommendation {
                item_id: self.train.items()[item].clone(),
                item_index: item,
                predicted_rating: e.value,
                source: if e.from_neighbors {
                    source
                } else {
                    PredictionSource::Fallback
                },
            })
            .collect();
        RecommendationList::new(entries)
    }
}

/// Computes user-based and item-based estimates for every neighbor count in
/// `neighbor_counts`, ranking candidates once per metric.
///
/// The test user's ratings on `test_items` are masked before any similarity
/// is computed.
pub fn estimate_components(
    test_user: &[Option<Rating>],
    train: &RatingsMatrix,
    test_items: &[usize],
    metric: SimilarityMetric,
    neighbor_counts: &[usize],
) -> Result<ComponentEstimates> {
    if neighbor_counts.contains(&0) {
        return Err(Error::invalid("n_neighbors must be at least 1"));
    }
    let task = Task::new(test_user, train, test_items)?;
    let ranked_users = task.rank_users(metric);
    let frame = task.item_frame(metric);
    let ranked_items: Vec<Vec<Neighbor>> = task
        .test_items
        .iter()
        .map(|&t| match &frame {
            Some(f) => rank_candidates(f, t, task.known_items.iter().copied()),
            None => Vec::new(),
        })
        .collect();

    let by_neighbors = neighbor_counts
        .iter()
        .map(|&n| {
            let user = task.user_based(&ranked_users, n);
            let item = task
                .test_items
                .iter()
                .zip(&ranked_items)
                .map(|(&t, ranked)| task.item_based(ranked, t, n))
                .collect();
            (n, user, item)
        })
        .collect();
    Ok(ComponentEstimates {
        test_items: task.test_items,
        by_neighbors,
    })
}

/// Predicts each test item as the plain mean of the `n` most similar
/// training users' ratings on it.
pub fn predict_user_based(
    test_user: &[Option<Rating>],
    train: &RatingsMatrix,
    test_items: &[usize],
    metric: SimilarityMetric,
    n: usize,
) -> Result<RecommendationList> {
    if n == 0 {
        return Err(Error::invalid("n_neighbors must be at least 1"));
    }
    let task = Task::new(test_user, train, test_items)?;
    let ranked = task.rank_users(metric);
    let estimates = task.user_based(&ranked, n);
    Ok(task.into_list(&estimates, PredictionSource::UserBased))
}

/// Predicts each test item, independently of the other test items, as the
/// plain mean of the test user's ratings on the `n` known items whose columns
/// are most similar to it.
pub fn predict_item_based(
    test_user: &[Option<Rating>],
    train: &RatingsMatrix,
    test_items: &[usize],
    metric: SimilarityMetric,
    n: usize,
) -> Result<RecommendationList> {
    if n == 0 {
        return Err(Error::invalid("n_neighbors must be at least 1"));
    }
    let task = Task::new(test_user, train, test_items)?;
    let frame = task.item_frame(metric);
    let estimates: Vec<Estimate> = task
        .test_items
        .iter()
        .map(|&t| {
            let ranked = match &frame {
                Some(f) => rank_candidates(f, t, task.known_items.iter().copied()),
                None => Vec::new(),
            };
            task.item_based(&ranked, t, n)
        })
        .collect();
    Ok(task.into_list(&estimates, PredictionSource::ItemBased))
}

/// `alpha * user_based + (1 - alpha) * item_based`, per item.
pub fn predict_hybrid(
    test_user: &[Option<Rating>],
    train: &RatingsMatrix,
    test_items: &[usize],
    config: &HybridConfig,
) -> Result<RecommendationList> {
    config.validate()?;
    let components = estimate_components(test_user, train, test_items, config.metric, &[config.n_neighbors])?;
    let (user, item) = components
        .for_neighbors(config.n_neighbors)
        .expect("requested neighbor count is present");
    let entries = components
        .test_items
        .iter()
        .zip(user.iter().zip(item))
        .map(|(&idx, (&u, &i))| {
            let (predicted_rating, source) = blend(u, i, config.alpha);
            Recommendation {
                item_id: train.items()[idx].clone(),
                item_index: idx,
                predicted_rating,
                source,
            }
        })
        .collect();
    Ok(RecommendationList::new(entries))
}

/// Builds a new user's rating vector, aligned with `items`, from
/// questionnaire answers keyed by item id. Unanswered items and "missing"
/// sentinel answers are left empty.
pub fn cold_start_profile(
    responses: &[(String, String)],
    mapping: &LabelMapping,
    items: &[String],
) -> Result<Vec<Option<Rating>>> {
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut profile = vec![None; items.len()];
    for (row, (item_id, answer)) in responses.iter().enumerate() {
        let &i = index
            .get(item_id.trim())
            .ok_or_else(|| Error::UnknownItem(item_id.clone()))?;
        let cell = mapping.parse_cell(answer).ok_or_else(|| Error::UnknownLabel {
            row: row + 1,
            column: item_id.clone(),
            label: answer.clone(),
        })?;
        profile[i] = cell.rating();
    }
    Ok(profile)
}

/// Answers in `responses` that are not rating cells (difficulty questions
/// and items dropped by filtering) can be removed with this before calling
/// [`cold_start_profile`]. Returns the kept answers and the dropped ids.
pub fn partition_responses(
    responses: &[(String, String)],
    keep: impl Fn(&str) -> bool,
) -> (Vec<(String, String)>, Vec<&str>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (id, answer) in responses {
        if keep(id.trim()) {
            kept.push((id.clone(), answer.clone()));
        } else {
            dropped.push(id.as_str());
        }
    }
    (kept, dropped)
}

/// Reads a profile CSV with columns `item_id,response`.
pub fn read_profile_csv<R: std::io::Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Malformed("profile rows must be item_id,response".into()));
        }
        out.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(v: u8) -> Option<Rating> {
        Some(Rating::new(v.into()).unwrap())
    }

    fn matrix(rows: Vec<Vec<Option<Rating>>>) -> RatingsMatrix {
        let n_items = rows[0].len();
        RatingsMatrix::from_rows(
            (0..rows.len()).map(|u| format!("u{u}")).collect(),
            (0..n_items).map(|i| format!("i{i}")).collect(),
            rows,
        )
        .unwrap()
    }

    fn value(list: &RecommendationList, item: &str) -> f64 {
        list.get(item).unwrap().predicted_rating
    }

    #[test]
    fn user_based_mean_of_constants() {
        // the test user matches every training user on i0..i2, all rated i3 as 4
        let train = matrix(vec![
            vec![r(1), r(2), r(3), r(4)],
            vec![r(1), r(2), r(3), r(4)],
            vec![r(1), r(2), r(3), r(4)],
        ]);
        let user = vec![r(1), r(2), r(3), None];
        for metric in SimilarityMetric::ALL {
            let list = predict_user_based(&user, &train, &[3], metric, 3).unwrap();
            assert_eq!(value(&list, "i3"), 4.0);
            assert_eq!(list.entries[0].source, PredictionSource::UserBased);
        }
    }

    #[test]
    fn user_based_skips_missing_neighbor_ratings() {
        let train = matrix(vec![
            vec![r(1), r(2), r(3), r(5)],
            vec![r(1), r(2), r(3), r(3)],
            vec![r(1), r(2), r(3), None],
        ]);
        let user = vec![r(1), r(2), r(3), None];
        let list = predict_user_based(&user, &train, &[3], SimilarityMetric::Pearson, 3).unwrap();
        assert_eq!(value(&list, "i3"), 4.0);
    }

    #[test]
    fn identical_training_user_with_one_neighbor() {
        let train = matrix(vec![
            vec![r(5), r(0), r(4), r(1), r(3)],
            vec![r(0), r(5), r(1), r(4), r(2)],
            vec![r(2), r(2), r(3), r(5), r(0)],
        ]);
        let user = train.row(1).to_vec();
        for metric in SimilarityMetric::ALL {
            let list = predict_user_based(&user, &train, &[2, 4], metric, 1).unwrap();
            assert_eq!(value(&list, "i2"), 1.0, "{metric}");
            assert_eq!(value(&list, "i4"), 2.0, "{metric}");
        }
    }

    #[test]
    fn item_based_examples() {
        // test user rated the three items closest to i3 with 5
        let train = matrix(vec![
            vec![r(1), r(1), r(1), r(1), r(5)],
            vec![r(4), r(4), r(4), r(4), r(0)],
            vec![r(2), r(2), r(2), r(2), r(3)],
        ]);
        let user = vec![r(5), r(5), r(5), None, r(0)];
        let list = predict_item_based(&user, &train, &[3], SimilarityMetric::Euclidean, 3).unwrap();
        assert_eq!(value(&list, "i3"), 5.0);
        assert_eq!(list.entries[0].source, PredictionSource::ItemBased);

        // i2 duplicates i0's column; the test user rated i0 as 2
        let train = matrix(vec![
            vec![r(1), r(5), r(1)],
            vec![r(4), r(0), r(4)],
            vec![r(3), r(3), r(3)],
        ]);
        let user = vec![r(2), r(4), None];
        for metric in SimilarityMetric::ALL {
            let list = predict_item_based(&user, &train, &[2], metric, 1).unwrap();
            assert_eq!(value(&list, "i2"), 2.0, "{metric}");
        }
    }

    #[test]
    fn item_based_ignores_other_test_items() {
        let train = matrix(vec![
            vec![r(1), r(5), r(1), r(1)],
            vec![r(4), r(0), r(4), r(4)],
            vec![r(3), r(3), r(3), r(3)],
        ]);
        // i3 is a duplicate of i0 and i2; with i2 also a test item only i0 is a candidate
        let user = vec![r(2), r(4), r(5), None];
        let list = predict_item_based(&user, &train, &[2, 3], SimilarityMetric::Euclidean, 1).unwrap();
        assert_eq!(value(&list, "i3"), 2.0);
    }

    #[test]
    fn fallback_cascade() {
        let train = matrix(vec![vec![r(4), r(2), None], vec![r(2), r(4), None]]);
        // the test user has no known ratings: no neighbors anywhere
        let user = vec![None, None, None];
        let list = predict_user_based(&user, &train, &[0, 2], SimilarityMetric::Pearson, 2).unwrap();
        let i0 = list.get("i0").unwrap();
        assert_eq!((i0.predicted_rating, i0.source), (3.0, PredictionSource::Fallback));
        // i2 has no training ratings: global mean
        assert_eq!(value(&list, "i2"), 3.0);
        let list = predict_item_based(&user, &train, &[0], SimilarityMetric::Cosine, 2).unwrap();
        assert_eq!(list.entries[0].source, PredictionSource::Fallback);
    }

    #[test]
    fn empty_train_is_rejected() {
        let empty = RatingsMatrix::new(vec![], vec!["i0".into()], vec![]).unwrap();
        assert!(predict_user_based(&[None], &empty, &[0], SimilarityMetric::Pearson, 1).is_err());
        let unrated = matrix(vec![vec![None]]);
        assert!(predict_item_based(&[None], &unrated, &[0], SimilarityMetric::Pearson, 1).is_err());
    }

    #[test]
    fn hybrid_blend_examples() {
        let u = Estimate {
            value: 4.0,
            from_neighbors: true,
        };
        let i = Estimate {
            value: 2.0,
            from_neighbors: true,
        };
        assert_eq!(blend(u, i, 1.0), (4.0, PredictionSource::UserBased));
        assert_eq!(blend(u, i, 0.0), (2.0, PredictionSource::ItemBased));
        assert_eq!(blend(u, i, 0.25), (2.5, PredictionSource::Hybrid));
        let lost = Estimate {
            value: 3.3,
            from_neighbors: false,
        };
        assert_eq!(blend(u, lost, 0.5), (4.0, PredictionSource::Fallback));
        assert_eq!(blend(lost, i, 0.5), (2.0, PredictionSource::Fallback));
        assert_eq!(blend(lost, i, 1.0), (3.3, PredictionSource::Fallback));
    }

    #[test]
    fn hybrid_config_validation() {
        assert!(HybridConfig::new(SimilarityMetric::Pearson, 0, 0.5).is_err());
        assert!(HybridConfig::new(SimilarityMetric::Pearson, 3, 1.5).is_err());
        let cfg = HybridConfig::new(SimilarityMetric::Pearson, 3, 0.25).unwrap();
        assert_eq!(cfg.to_string(), "pearson; n=3; alpha=1/4");
    }

    #[test]
    fn alpha_formatting() {
        assert_eq!(format_alpha(0.0), "0");
        assert_eq!(format_alpha(1.0), "1");
        assert_eq!(format_alpha(1.0 / 7.0), "1/7");
        assert_eq!(format_alpha(2.0 / 3.0), "2/3");
        assert_eq!(format_alpha(0.3), "3/10");
        assert_eq!(format_alpha(0.123), "0.123");
        assert_eq!(parse_alpha("1/8").unwrap(), 0.125);
        assert_eq!(parse_alpha("0.5").unwrap(), 0.5);
        assert!(parse_alpha("3/2").is_err());
        assert!(parse_alpha("x").is_err());
    }

    #[test]
    fn cold_start_profiles() {
        let mapping = LabelMapping::questionnaire();
        let items: Vec<String> = (0..8).map(|i| format!("i{i}")).collect();
        let all_unknown: Vec<_> = items.iter().map(|i| (i.clone(), "I don't know".to_string())).collect();
        assert!(cold_start_profile(&all_unknown, &mapping, &items)
            .unwrap()
            .iter()
            .all(Option::is_none));

        let answers = [
            "not at all",
            "very little",
            "little",
            "medium",
            "much",
            "very much",
            "never tried",
            "I don't know",
        ];
        let sheet: Vec<_> = items
            .iter()
            .zip(answers)
            .map(|(i, a)| (i.clone(), a.to_string()))
            .collect();
        let profile = cold_start_profile(&sheet, &mapping, &items).unwrap();
        assert_eq!(profile, [r(0), r(1), r(2), r(3), r(4), r(5), None, None]);

        let bad = vec![("zz".to_string(), "much".to_string())];
        assert!(matches!(
            cold_start_profile(&bad, &mapping, &items),
            Err(Error::UnknownItem(_))
        ));
        let bad_label = vec![("i0".to_string(), "sort of".to_string())];
        assert!(matches!(
            cold_start_profile(&bad_label, &mapping, &items),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn cold_start_matches_training_row() {
        let mapping = LabelMapping::questionnaire();
        let train = matrix(vec![vec![r(5), None, r(0), r(3)], vec![r(1), r(2), r(3), r(4)]]);
        let sheet: Vec<_> = train
            .items()
            .iter()
            .zip(train.row(0))
            .map(|(id, c)| {
                (
                    id.clone(),
                    c.map_or("never tried".to_string(), |r| mapping.label_for(r).to_string()),
                )
            })
            .collect();
        assert_eq!(
            cold_start_profile(&sheet, &mapping, train.items()).unwrap(),
            train.row(0)
        );
    }

    #[test]
    fn test_item_ratings_are_masked() {
        let train = matrix(vec![
            vec![r(5), r(0), r(4), r(1)],
            vec![r(0), r(5), r(1), r(4)],
            vec![r(2), r(2), r(3), r(5)],
            vec![r(4), r(1), r(5), r(0)],
        ]);
        let base = vec![r(4), r(1), None, None];
        let cfg = HybridConfig::new(SimilarityMetric::Pearson, 2, 0.5).unwrap();
        let expected = predict_hybrid(&base, &train, &[2, 3], &cfg).unwrap();
        for (a, b) in [(0, 0), (5, 5), (0, 5), (3, 1)] {
            let leaked = vec![r(4), r(1), r(a), r(b)];
            for metric in SimilarityMetric::ALL {
                let cfg = HybridConfig { metric, ..cfg };
                assert_eq!(
                    predict_hybrid(&leaked, &train, &[2, 3], &cfg).unwrap(),
                    predict_hybrid(&base, &train, &[2, 3], &cfg).unwrap()
                );
            }
        }
        assert_eq!(expected.len(), 2);
    }

    fn arb_case() -> impl Strategy<Value = (RatingsMatrix, Vec<Option<Rating>>, Vec<usize>)> {
        (2usize..8, 2usize..6).prop_flat_map(|(nu, ni)| {
            (
                proptest::collection::vec(proptest::option::weighted(0.75, 0u8..=5), nu * ni),
                proptest::collection::vec(proptest::option::weighted(0.75, 0u8..=5), ni),
                proptest::sample::subsequence((0..ni).collect::<Vec<_>>(), 1..ni),
            )
                .prop_filter_map("train needs ratings", move |(cells, user, test)| {
                    let conv = |c: Option<u8>| c.map(|v| Rating::new(v.into()).unwrap());
                    let m = RatingsMatrix::new(
                        (0..nu).map(|u| format!("u{u}")).collect(),
                        (0..ni).map(|i| format!("i{i}")).collect(),
                        cells.into_iter().map(conv).collect(),
                    )
                    .ok()?;
                    m.global_mean()?;
                    Some((m, user.into_iter().map(conv).collect(), test))
                })
        })
    }

    proptest! {
        #[test]
        fn hybrid_endpoints_and_range((train, user, test) in arb_case(), n in 1usize..5, alpha in 0.0f64..=1.0) {
            for metric in SimilarityMetric::ALL {
                let ub = predict_user_based(&user, &train, &test, metric, n).unwrap();
                let ib = predict_item_based(&user, &train, &test, metric, n).unwrap();
                let h1 = predict_hybrid(&user, &train, &test, &HybridConfig::new(metric, n, 1.0).unwrap()).unwrap();
                let h0 = predict_hybrid(&user, &train, &test, &HybridConfig::new(metric, n, 0.0).unwrap()).unwrap();
                prop_assert_eq!(&h1, &ub);
                prop_assert_eq!(&h0, &ib);
                let h = predict_hybrid(&user, &train, &test, &HybridConfig::new(metric, n, alpha).unwrap()).unwrap();
                prop_assert_eq!(h.len(), test.len());
                for rec in &h.entries {
                    prop_assert!((0.0..=5.0).contains(&rec.predicted_rating));
                    let u = ub.get(&rec.item_id).unwrap().predicted_rating;
                    let i = ib.get(&rec.item_id).unwrap().predicted_rating;
                    prop_assert!(rec.predicted_rating >= u.min(i) - 1e-12 && rec.predicted_rating <= u.max(i) + 1e-12);
                }
                for w in h.entries.windows(2) {
                    prop_assert!(w[0].predicted_rating >= w[1].predicted_rating);
                }
                prop_assert_eq!(&h, &predict_hybrid(&user, &train, &test, &HybridConfig::new(metric, n, alpha).unwrap()).unwrap());
            }
        }

        #[test]
        fn hybrid_monotone_in_alpha(u in 0.0f64..=5.0, i in 0.0f64..=5.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let e = |v| Estimate { value: v, from_neighbors: true };
            let (p_lo, _) = blend(e(u), e(i), lo);
            let (p_hi, _) = blend(e(u), e(i), hi);
            if u >= i {
                prop_assert!(p_hi >= p_lo - 1e-12);
            } else {
                prop_assert!(p_hi <= p_lo + 1e-12);
            }
        }
    }
}
