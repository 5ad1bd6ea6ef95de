//! Similarity measures and nearest-neighbor selection.
//!
//! Pearson correlation works directly on sparse vectors, using only the
//! positions where both vectors carry a rating. Euclidean and cosine distance
//! need a total metric space and run on mean-imputed dense vectors.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{impute, Axis, Rating, RatingsMatrix};

/// Fewest co-rated positions a Pearson coefficient is computed over.
pub const DEFAULT_MIN_OVERLAP: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMetric {
    Pearson,
    Euclidean,
    Cosine,
}

impl SimilarityMetric {
    pub const ALL: [SimilarityMetric; 3] = [
        SimilarityMetric::Euclidean,
        SimilarityMetric::Cosine,
        SimilarityMetric::Pearson,
    ];

    /// Pearson ranks by similarity (higher is closer), the other two by
    /// distance (lower is closer).
    pub fn higher_is_closer(self) -> bool {
        matches!(self, SimilarityMetric::Pearson)
    }

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::Pearson => "pearson",
            SimilarityMetric::Euclidean => "euclidean",
            SimilarityMetric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "pearson" => Ok(SimilarityMetric::Pearson),
            "euclidean" => Ok(SimilarityMetric::Euclidean),
            "cosine" => Ok(SimilarityMetric::Cosine),
            other => Err(Error::invalid(format!("unknown similarity metric {other:?}"))),
        }
    }
}

/// Pearson correlation over the positions where both vectors are present.
///
/// Returns `None` when fewer than `min_overlap` (and never fewer than two)
/// positions are co-present, or when either restricted vector is constant.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>], min_overlap: usize) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson over vectors of different length");
    let co_present = || x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?)));
    let (mut sum_x, mut sum_y, mut n) = (0.0, 0.0, 0usize);
    for (a, b) in co_present() {
        sum_x += a;
        sum_y += b;
        n += 1;
    }
    if n < min_overlap.max(2) {
        return None;
    }
    let (mean_x, mean_y) = (sum_x / n as f64, sum_y / n as f64);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in co_present() {
        let (dx, dy) = (a - mean_x, b - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `1 - cos(x, y)`, in `[0, 2]`. `Ok(None)` when either vector has zero norm.
pub fn cosine(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Ok(None);
    }
    Ok(Some((1.0 - dot / (xx * yy).sqrt()).clamp(0.0, 2.0)))
}

/// The entities (users or items) that neighbors are drawn from, each as a
/// sparse rating vector and, for the distance metrics, its imputed dense
/// counterpart.
#[derive(Clone, Debug)]
pub struct SimilarityFrame {
    metric: SimilarityMetric,
    dim: usize,
    sparse: Vec<Option<f64>>,
    dense: Vec<f64>,
}

impl SimilarityFrame {
    /// One entity per user row. Distance metrics fill gaps with each user's
    /// own mean.
    pub fn over_users(m: &RatingsMatrix, metric: SimilarityMetric) -> Result<Self> {
        let sparse = m.rows().flatten().map(|c| c.map(Rating::as_f64)).collect();
        let dense = match metric {
            SimilarityMetric::Pearson => Vec::new(),
            _ => {
                let d = impute(m, Axis::ByUser)?;
                (0..d.n_rows()).flat_map(|r| d.row(r).to_vec()).collect()
            }
        };
        Ok(Self {
            metric,
            dim: m.n_items(),
            sparse,
            dense,
        })
    }

    /// One entity per item column. Distance metrics fill gaps with each
    /// item's mean.
    pub fn over_items(m: &RatingsMatrix, metric: SimilarityMetric) -> Result<Self> {
        let sparse = (0..m.n_items())
            .flat_map(|i| m.column(i).map(|c| c.map(Rating::as_f64)))
            .collect();
        let dense = match metric {
            SimilarityMetric::Pearson => Vec::new(),
            _ => {
                let d = impute(m, Axis::ByItem)?;
                (0..d.n_cols()).flat_map(|c| d.column(c)).collect()
            }
        };
        Ok(Self {
            metric,
            dim: m.n_users(),
            sparse,
            dense,
        })
    }

    pub fn metric(&self) -> SimilarityMetric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.sparse.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sparse(&self, e: usize) -> &[Option<f64>] {
        &self.sparse[e * self.dim..(e + 1) * self.dim]
    }

    fn dense(&self, e: usize) -> &[f64] {
        &self.dense[e * self.dim..(e + 1) * self.dim]
    }

    /// Similarity (Pearson) or distance between two entities; `None` when the
    /// pair cannot be ranked.
    pub fn score(&self, a: usize, b: usize) -> Option<f64> {
        match self.metric {
            SimilarityMetric::Pearson => pearson(self.sparse(a), self.sparse(b), DEFAULT_MIN_OVERLAP),
            SimilarityMetric::Euclidean => euclidean(self.dense(a), self.dense(b)).ok(),
            SimilarityMetric::Cosine => cosine(self.dense(a), self.dense(b)).ok().flatten(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub score: f64,
}

/// Closest entities first; never contains the query itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub metric: SimilarityMetric,
    pub entries: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|n| n.index)
    }

    /// Keeps the first `n` entries.
    pub fn truncated(&self, n: usize) -> NeighborSet {
        NeighborSet {
            metric: self.metric,
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
        }
    }
}

/// Orders neighbors closest first, ties by ascending entity index.
pub(crate) fn closeness_order(metric: SimilarityMetric) -> impl Fn(&Neighbor, &Neighbor) -> Ordering {
    move |a, b| {
        let by_score = if metric.higher_is_closer() {
            b.score.total_cmp(&a.score)
        } else {
            a.score.total_cmp(&b.score)
        };
        by_score.then(a.index.cmp(&b.index))
    }
}

/// Every rankable candidate, closest first.
pub fn rank_candidates(
    frame: &SimilarityFrame,
    query: usize,
    candidates: impl IntoIterator<Item = usize>,
) -> Vec<Neighbor> {
    let mut ranked: Vec<Neighbor> = candidates
        .into_iter()
        .filter(|&c| c != query)
        .filter_map(|c| frame.score(query, c).map(|score| Neighbor { index: c, score }))
        .collect();
    ranked.sort_by(closeness_order(frame.metric));
    ranked
}

/// The `n_neighbors` entities of `frame` closest to `query`.
///
/// Candidates whose score is undefined (too little overlap, constant vector,
/// zero norm) are dropped before ranking. If fewer than `n_neighbors` remain
/// all of them are returned; if none remain the call fails.
pub fn compute_similarities(frame: &SimilarityFrame, query: usize, n_neighbors: usize) -> Result<NeighborSet> {
    if query >= frame.len() {
        return Err(Error::invalid(format!(
            "query {query} outside frame of {}",
            frame.len()
        )));
    }
    if n_neighbors == 0 {
        return Err(Error::invalid("n_neighbors must be at least 1"));
    }
    let mut ranked = rank_candidates(frame, query, 0..frame.len());
    if ranked.is_empty() {
        return Err(Error::NoRankableCandidates(query));
    }
    ranked.truncate(n_neighbors);
    Ok(NeighborSet {
        metric: frame.metric,
        entries: ranked,
    })
}
