//! Experiment protocol: user split, k-fold cross-validation, item-holdout
//! epochs, error and ranking metrics, and the exhaustive grid search over
//! similarity metric x neighbor count x hybrid weight.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::predict::{blend, estimate_components, parse_alpha, HybridConfig, Recommendation, RecommendationList};
use crate::ratings::RatingsMatrix;
use crate::similarity::SimilarityMetric;

const USER_SPLIT_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;
const HOLDOUT_STREAM_BASE: u64 = 1 << 32;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `floor(fraction * n)`, tolerant of representation error in `fraction`.
fn floor_share(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Exact number of training users; overrides `train_fraction`.
    pub train_count: Option<usize>,
    pub item_holdout_fraction: f64,
    pub holdout_epochs: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            train_count: None,
            item_holdout_fraction: 0.20,
            holdout_epochs: 5,
            cv_folds: 10,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.train_fraction) || !open_unit(self.item_holdout_fraction) {
            return Err(Error::invalid("split fractions must lie in (0, 1)"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if self.holdout_epochs == 0 {
            return Err(Error::invalid("holdout_epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Seeded partition of user indices into `(train, test)`, each sorted.
pub fn split_user_indices(n_users: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if n_users < 2 {
        return Err(Error::invalid("need at least two users to split"));
    }
    let n_train = spec
        .train_count
        .unwrap_or_else(|| floor_share(spec.train_fraction, n_users));
    if n_train == 0 || n_train >= n_users {
        return Err(Error::invalid(format!(
            "split of {n_users} users leaves an empty side ({n_train} train)"
        )));
    }
    let mut order: Vec<usize> = (0..n_users).collect();
    order.shuffle(&mut rng(spec.seed, USER_SPLIT_STREAM));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_users(m: &RatingsMatrix, spec: &SplitSpec) -> Result<(RatingsMatrix, RatingsMatrix)> {
    let (train, test) = split_user_indices(m.n_users(), spec)?;
    Ok((m.select_users(&train), m.select_users(&test)))
}

/// Items split into a known profile and held-out prediction targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ItemHoldout {
    pub known: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded selection of `floor(item_holdout_fraction * n_items)` test items.
/// Each epoch draws from its own random stream.
pub fn holdout_items(m: &RatingsMatrix, spec: &SplitSpec, epoch: usize) -> Result<ItemHoldout> {
    holdout_item_indices(m.n_items(), spec, epoch)
}

pub fn holdout_item_indices(n_items: usize, spec: &SplitSpec, epoch: usize) -> Result<ItemHoldout> {
    spec.validate()?;
    if epoch >= spec.holdout_epochs {
        return Err(Error::invalid(format!(
            "epoch {epoch} outside 0..{}",
            spec.holdout_epochs
        )));
    }
    let n_test = floor_share(spec.item_holdout_fraction, n_items);
    if n_test == 0 {
        return Err(Error::invalid(format!(
            "item holdout selects no items out of {n_items}"
        )));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut rng(spec.seed, HOLDOUT_STREAM_BASE + epoch as u64));
    let mut test = order[..n_test].to_vec();
    let mut known = order[n_test..].to_vec();
    test.sort_unstable();
    known.sort_unstable();
    Ok(ItemHoldout { known, test })
}

/// Seeded assignment of `n` indices to `folds` folds of near-equal size.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!("cannot split {n} users into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed, FOLD_STREAM));
    let mut out = vec![Vec::new(); folds];
    for (pos, idx) in order.into_iter().enumerate() {
        out[pos % folds].push(idx);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

/// Mean absolute error over `(predicted, actual)` pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("no rating pairs"));
    }
    Ok(pairs.iter().map(|(p, q)| (p - q).abs()).sum::<f64>() / pairs.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelativeError {
    pub value: f64,
    pub used: usize,
    /// Pairs dropped because the actual rating is 0.
    pub excluded: usize,
}

/// Mean of `|p - q| / q` over pairs with `q > 0`.
pub fn relative_error(pairs: &[(f64, f64)]) -> Result<RelativeError> {
    let (sum, used) = pairs
        .iter()
        .filter(|(_, q)| *q > 0.0)
        .fold((0.0, 0usize), |(s, n), (p, q)| (s + (p - q).abs() / q, n + 1));
    if used == 0 {
        return Err(Error::Empty("no pairs with a positive actual rating"));
    }
    Ok(RelativeError {
        value: sum / used as f64,
        used,
        excluded: pairs.len() - used,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    /// Absent when the user has no relevant test item.
    pub recall: Option<f64>,
}

/// Precision and recall of the top `k` recommendations. An item is relevant
/// when its actual rating is at least `relevance_threshold`.
pub fn precision_recall_at_k(
    recs: &RecommendationList,
    actuals: &HashMap<String, f64>,
    k: usize,
    relevance_threshold: f64,
) -> Result<PrecisionRecall> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if recs.is_empty() {
        return Err(Error::Empty("no recommendations to score"));
    }
    let relevant = |r: &Recommendation| -> Result<bool> {
        actuals
            .get(&r.item_id)
            .map(|&q| q >= relevance_threshold)
            .ok_or_else(|| Error::invalid(format!("no actual rating for {}", r.item_id)))
    };
    let mut total_relevant = 0;
    for r in &recs.entries {
        total_relevant += usize::from(relevant(r)?);
    }
    let top = recs.top(k);
    let mut hits = 0;
    for r in top {
        hits += usize::from(relevant(r)?);
    }
    Ok(PrecisionRecall {
        precision: hits as f64 / top.len() as f64,
        recall: (total_relevant > 0).then(|| hits as f64 / total_relevant as f64),
    })
}

fn deserialize_alphas<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Weight {
        Number(f64),
        Text(String),
    }
    Vec::<Weight>::deserialize(d)?
        .into_iter()
        .map(|w| match w {
            Weight::Number(v) => Ok(v),
            Weight::Text(s) => parse_alpha(&s).map_err(serde::de::Error::custom),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub metrics: Vec<SimilarityMetric>,
    pub neighbor_counts: Vec<usize>,
    /// User-based weights; `1 - alpha` goes to the item-based side.
    #[serde(deserialize_with = "deserialize_alphas")]
    pub alphas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            metrics: SimilarityMetric::ALL.to_vec(),
            neighbor_counts: vec![3, 5, 7, 11],
            alphas: vec![
                0.0,
                1.0 / 8.0,
                1.0 / 7.0,
                1.0 / 6.0,
                1.0 / 5.0,
                1.0 / 4.0,
                1.0 / 3.0,
                1.0 / 2.0,
                2.0 / 3.0,
                1.0,
            ],
        }
    }
}

impl GridSpec {
    pub fn singleton(config: HybridConfig) -> Self {
        Self {
            metrics: vec![config.metric],
            neighbor_counts: vec![config.n_neighbors],
            alphas: vec![config.alpha],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() || self.neighbor_counts.is_empty() || self.alphas.is_empty() {
            return Err(Error::invalid("grid dimensions must be non-empty"));
        }
        if self.neighbor_counts.contains(&0) {
            return Err(Error::invalid("neighbor counts must be at least 1"));
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("alphas must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Every grid cell, metric-major, then neighbor count, then alpha.
    pub fn configs(&self) -> Vec<HybridConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &metric in &self.metrics {
            for &n_neighbors in &self.neighbor_counts {
                for &alpha in &self.alphas {
                    out.push(HybridConfig {
                        metric,
                        n_neighbors,
                        alpha,
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.metrics.len() * self.neighbor_counts.len() * self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Cut-off for precision@k and recall@k.
    pub k: usize,
    pub relevance_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k: 5,
            relevance_threshold: 3.0,
        }
    }
}

/// One grid cell. `cv_mae` drives model selection; the other figures come
/// from the held-out test users.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub metric: SimilarityMetric,
    pub n_neighbors: usize,
    pub alpha: f64,
    pub alpha_label: String,
    pub cv_mae: f64,
    pub test_mae: f64,
    pub relative_error: Option<f64>,
    pub precision_at_k: Option<f64>,
    pub recall_at_k: Option<f64>,
}

impl GridRow {
    pub fn config(&self) -> HybridConfig {
        HybridConfig {
            metric: self.metric,
            n_neighbors: self.n_neighbors,
            alpha: self.alpha,
        }
    }
}

/// Best configuration for one fixed weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightBest {
    pub alpha: f64,
    pub alpha_label: String,
    pub metric: SimilarityMetric,
    pub n_neighbors: usize,
    pub cv_mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub split: SplitSpec,
    pub grid: GridSpec,
    pub options: EvalOptions,
    pub dataset_fingerprint: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_train_users: usize,
    pub n_test_users: usize,
    pub cv_tasks: usize,
    pub test_tasks: usize,
    pub holdout_items_per_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub rows: Vec<GridRow>,
    pub best: HybridConfig,
    pub best_row: GridRow,
    pub weights_analysis: Vec<WeightBest>,
    /// Test MAE of always predicting the training set's global mean.
    pub baseline_test_mae: f64,
    /// Test pairs left out of the relative error because the actual rating is 0.
    pub zero_actual_excluded: usize,
    pub metadata: RunMetadata,
}

impl EvaluationReport {
    pub fn k(&self) -> usize {
        self.metadata.options.k
    }
}

/// Sums for one grid cell within one evaluation task.
#[derive(Clone, Debug, Default)]
struct CellStats {
    abs_err: f64,
    pairs: usize,
    rel_err: f64,
    rel_used: usize,
    rel_excluded: usize,
    precision_sum: f64,
    precision_n: usize,
    recall_sum: f64,
    recall_n: usize,
}

/// One prediction task: train on `train`, predict `holdout.test` for each
/// row of `users`.
struct EvalTask<'a> {
    train: &'a RatingsMatrix,
    users: &'a RatingsMatrix,
    holdout: &'a ItemHoldout,
}

/// Runs one task for one metric and returns stats for every
/// `(n_neighbors, alpha)` cell, n-major.
fn run_task(
    task: &EvalTask<'_>,
    metric: SimilarityMetric,
    grid: &GridSpec,
    options: Option<&EvalOptions>,
) -> Result<Vec<CellStats>> {
    let n_alphas = grid.alphas.len();
    let mut stats = vec![CellStats::default(); grid.neighbor_counts.len() * n_alphas];
    for u in 0..task.users.n_users() {
        let row = task.users.row(u);
        let targets: Vec<usize> = task
            .holdout
            .test
            .iter()
            .copied()
            .filter(|&i| row[i].is_some())
            .collect();
        if targets.is_empty() {
            continue;
        }
        let actual: Vec<f64> = targets.iter().map(|&i| row[i].expect("filtered").as_f64()).collect();
        let components = estimate_components(row, task.train, &targets, metric, &grid.neighbor_counts)?;
        for (ni, (_, user_est, item_est)) in components.by_neighbors.iter().enumerate() {
            for (ai, &alpha) in grid.alphas.iter().enumerate() {
                let cell = &mut stats[ni * n_alphas + ai];
                let predicted: Vec<(f64, _)> = user_est
                    .iter()
                    .zip(item_est)
                    .map(|(&ue, &ie)| blend(ue, ie, alpha))
                    .collect();
                for ((p, _), &q) in predicted.iter().zip(&actual) {
                    cell.abs_err += (p - q).abs();
                    cell.pairs += 1;
                    if q > 0.0 {
                        cell.rel_err += (p - q).abs() / q;
                        cell.rel_used += 1;
                    } else {
                        cell.rel_excluded += 1;
                    }
                }
                if let Some(opts) = options {
                    let recs = RecommendationList::new(
                        targets
                            .iter()
                            .zip(&predicted)
                            .map(|(&item, &(predicted_rating, source))| Recommendation {
                                item_id: task.train.items()[item].clone(),
                                item_index: item,
                                predicted_rating,
                                source,
                            })
                            .collect(),
                    );
                    let actuals: HashMap<String, f64> = targets
                        .iter()
                        .zip(&actual)
                        .map(|(&item, &q)| (task.train.items()[item].clone(), q))
                        .collect();
                    let pr = precision_recall_at_k(&recs, &actuals, opts.k, opts.relevance_threshold)?;
                    cell.precision_sum += pr.precision;
                    cell.precision_n += 1;
                    if let Some(r) = pr.recall {
                        cell.recall_sum += r;
                        cell.recall_n += 1;
                    }
                }
            }
        }
    }
    Ok(stats)
}

/// Per-cell figures averaged over tasks: MAE and relative error are computed
/// per task then averaged with equal weight; precision and recall are
/// averaged over every evaluated (user, task).
#[derive(Clone, Debug, Default)]
struct CellSummary {
    mae: Option<f64>,
    relative_error: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    rel_excluded: usize,
}

fn summarize(per_task: &[&CellStats]) -> CellSummary {
    let task_maes: Vec<f64> = per_task
        .iter()
        .filter(|s| s.pairs > 0)
        .map(|s| s.abs_err / s.pairs as f64)
        .collect();
    let task_rel: Vec<f64> = per_task
        .iter()
        .filter(|s| s.rel_used > 0)
        .map(|s| s.rel_err / s.rel_used as f64)
        .collect();
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let ratio = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
    let (p_sum, p_n, r_sum, r_n) = per_task.iter().fold((0.0, 0, 0.0, 0), |acc, s| {
        (
            acc.0 + s.precision_sum,
            acc.1 + s.precision_n,
            acc.2 + s.recall_sum,
            acc.3 + s.recall_n,
        )
    });
    CellSummary {
        mae: avg(&task_maes),
        relative_error: avg(&task_rel),
        precision: ratio(p_sum, p_n),
        recall: ratio(r_sum, r_n),
        rel_excluded: per_task.iter().map(|s| s.rel_excluded).sum(),
    }
}

/// Runs every `(metric, task)` pair and returns, per metric, the stats of
/// each task in task order. Work runs in parallel; results are merged in
/// deterministic order.
fn run_all(
    tasks: &[EvalTask<'_>],
    grid: &GridSpec,
    options: Option<&EvalOptions>,
    label: &(dyn Fn(usize) -> String + Sync),
) -> Result<Vec<Vec<Vec<CellStats>>>> {
    let jobs: Vec<(usize, usize)> = (0..grid.metrics.len())
        .flat_map(|m| (0..tasks.len()).map(move |t| (m, t)))
        .collect();
    let results: Vec<Result<Vec<CellStats>>> = jobs
        .par_iter()
        .map(|&(m, t)| {
            let metric = grid.metrics[m];
            run_task(&tasks[t], metric, grid, options).map_err(|e| Error::GridCell {
                cell: format!("metric={metric} {}", label(t)),
                source: Box::new(e),
            })
        })
        .collect();
    let mut out = vec![Vec::with_capacity(tasks.len()); grid.metrics.len()];
    for ((m, _), res) in jobs.into_iter().zip(results) {
        out[m].push(res?);
    }
    Ok(out)
}

fn cell_index(grid: &GridSpec, n_idx: usize, a_idx: usize) -> usize {
    n_idx * grid.alphas.len() + a_idx
}

fn baseline_mae(train: &RatingsMatrix, test: &RatingsMatrix, holdouts: &[ItemHoldout]) -> Result<f64> {
    let global = train.global_mean().ok_or(Error::Empty("train matrix has no ratings"))?;
    let per_epoch: Vec<f64> = holdouts
        .iter()
        .filter_map(|h| {
            let pairs: Vec<(f64, f64)> = test
                .rows()
                .flat_map(|row| h.test.iter().filter_map(move |&i| row[i].map(|q| (global, q.as_f64()))))
                .collect();
            mae(&pairs).ok()
        })
        .collect();
    if per_epoch.is_empty() {
        return Err(Error::Empty("no held-out test ratings"));
    }
    Ok(per_epoch.iter().sum::<f64>() / per_epoch.len() as f64)
}

struct Protocol {
    train: RatingsMatrix,
    test: RatingsMatrix,
    holdouts: Vec<ItemHoldout>,
}

impl Protocol {
    fn new(m: &RatingsMatrix, split: &SplitSpec) -> Result<Self> {
        let (train, test) = split_users(m, split)?;
        let holdouts = (0..split.holdout_epochs)
            .map(|e| holdout_items(m, split, e))
            .collect::<Result<_>>()?;
        Ok(Self { train, test, holdouts })
    }

    fn test_tasks(&self) -> Vec<EvalTask<'_>> {
        self.holdouts
            .iter()
            .map(|h| EvalTask {
                train: &self.train,
                users: &self.test,
                holdout: h,
            })
            .collect()
    }

    fn metadata(
        &self,
        m: &RatingsMatrix,
        split: &SplitSpec,
        grid: &GridSpec,
        options: &EvalOptions,
        cv_tasks: usize,
    ) -> RunMetadata {
        RunMetadata {
            seed: split.seed,
            split: split.clone(),
            grid: grid.clone(),
            options: *options,
            dataset_fingerprint: m.fingerprint(),
            n_users: m.n_users(),
            n_items: m.n_items(),
            n_train_users: self.train.n_users(),
            n_test_users: self.test.n_users(),
            cv_tasks,
            test_tasks: self.holdouts.len(),
            holdout_items_per_epoch: self.holdouts[0].test.len(),
        }
    }
}

/// Exhaustive model selection.
///
/// Every grid cell is scored by cross-validated MAE on the training users:
/// each fold's users in turn become test users, predicting the same held-out
/// items in each epoch. The lowest-MAE cell wins (ties keep grid order).
/// All cells are then also scored on the held-out test users.
pub fn grid_search(
    m: &RatingsMatrix,
    split: &SplitSpec,
    grid: &GridSpec,
    options: &EvalOptions,
) -> Result<EvaluationReport> {
    grid.validate()?;
    if options.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let protocol = Protocol::new(m, split)?;
    let folds = kfold(protocol.train.n_users(), split.cv_folds, split.seed)?;

    let fold_mats: Vec<(RatingsMatrix, RatingsMatrix)> = folds
        .iter()
        .map(|fold| {
            let rest: Vec<usize> = (0..protocol.train.n_users())
                .filter(|u| fold.binary_search(u).is_err())
                .collect();
            (protocol.train.select_users(&rest), protocol.train.select_users(fold))
        })
        .collect();
    let cv_tasks: Vec<EvalTask<'_>> = fold_mats
        .iter()
        .flat_map(|(train, users)| {
            protocol.holdouts.iter().map(move |h| EvalTask {
                train,
                users,
                holdout: h,
            })
        })
        .collect();
    let epochs = split.holdout_epochs;
    let cv = run_all(&cv_tasks, grid, None, &|t| {
        format!("fold={} epoch={}", t / epochs, t % epochs)
    })?;
    let test_tasks = protocol.test_tasks();
    let tested = run_all(&test_tasks, grid, Some(options), &|t| format!("test epoch={t}"))?;

    let mut rows = Vec::with_capacity(grid.len());
    let mut zero_actual_excluded = 0;
    for (mi, &metric) in grid.metrics.iter().enumerate() {
        for (ni, &n_neighbors) in grid.neighbor_counts.iter().enumerate() {
            for (ai, &alpha) in grid.alphas.iter().enumerate() {
                let c = cell_index(grid, ni, ai);
                let cv_summary = summarize(&cv[mi].iter().map(|t| &t[c]).collect::<Vec<_>>());
                let test_summary = summarize(&tested[mi].iter().map(|t| &t[c]).collect::<Vec<_>>());
                let cell = format!(
                    "{}",
                    HybridConfig {
                        metric,
                        n_neighbors,
                        alpha
                    }
                );
                let no_pairs = |phase: &str| Error::GridCell {
                    cell: cell.clone(),
                    source: Box::new(Error::Empty(if phase == "cv" {
                        "no cross-validation pairs"
                    } else {
                        "no test pairs"
                    })),
                };
                zero_actual_excluded = test_summary.rel_excluded;
                rows.push(GridRow {
                    metric,
                    n_neighbors,
                    alpha,
                    alpha_label: crate::predict::format_alpha(alpha),
                    cv_mae: cv_summary.mae.ok_or_else(|| no_pairs("cv"))?,
                    test_mae: test_summary.mae.ok_or_else(|| no_pairs("test"))?,
                    relative_error: test_summary.relative_error,
                    precision_at_k: test_summary.precision,
                    recall_at_k: test_summary.recall,
                });
            }
        }
    }

    let best_row = argmin_row(&rows).clone();
    let weights_analysis = grid
        .alphas
        .iter()
        .map(|&alpha| {
            let subset: Vec<GridRow> = rows.iter().filter(|r| r.alpha == alpha).cloned().collect();
            let best = argmin_row(&subset);
            WeightBest {
                alpha,
                alpha_label: best.alpha_label.clone(),
                metric: best.metric,
                n_neighbors: best.n_neighbors,
                cv_mae: best.cv_mae,
            }
        })
        .collect();
    let baseline_test_mae = baseline_mae(&protocol.train, &protocol.test, &protocol.holdouts)?;
    Ok(EvaluationReport {
        best: best_row.config(),
        best_row,
        rows,
        weights_analysis,
        baseline_test_mae,
        zero_actual_excluded,
        metadata: protocol.metadata(m, split, grid, options, cv_tasks.len()),
    })
}

fn argmin_row(rows: &[GridRow]) -> &GridRow {
    rows.iter()
        .reduce(|best, r| if r.cv_mae < best.cv_mae { r } else { best })
        .expect("grid is non-empty")
}

/// Test-set evaluation of one fixed configuration, without cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEvaluation {
    pub config: HybridConfig,
    pub alpha_label: String,
    pub test_mae: f64,
    pub relative_error: Option<f64>,
    pub precision_at_k: Option<f64>,
    pub recall_at_k: Option<f64>,
    pub zero_actual_excluded: usize,
    pub baseline_test_mae: f64,
    pub metadata: RunMetadata,
}

pub fn evaluate_config(
    m: &RatingsMatrix,
    split: &SplitSpec,
    config: &HybridConfig,
    options: &EvalOptions,
) -> Result<ConfigEvaluation> {
    config.validate()?;
    let grid = GridSpec::singleton(*config);
    let protocol = Protocol::new(m, split)?;
    let tasks = protocol.test_tasks();
    let tested = run_all(&tasks, &grid, Some(options), &|t| format!("test epoch={t}"))?;
    let summary = summarize(&tested[0].iter().map(|t| &t[0]).collect::<Vec<_>>());
    Ok(ConfigEvaluation {
        config: *config,
        alpha_label: crate::predict::format_alpha(config.alpha),
        test_mae: summary.mae.ok_or(Error::Empty("no test pairs"))?,
        relative_error: summary.relative_error,
        precision_at_k: summary.precision,
        recall_at_k: summary.recall,
        zero_actual_excluded: summary.rel_excluded,
        baseline_test_mae: baseline_mae(&protocol.train, &protocol.test, &protocol.holdouts)?,
        metadata: protocol.metadata(m, split, &grid, options, 0),
    })
}
