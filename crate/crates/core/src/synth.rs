//! Seeded synthetic rating matrices with planted user clusters and item
//! groups.
//!
//! Every user belongs to one cluster and every item to one group; a cell's
//! latent value is the affinity of that (cluster, group) pair. Observed
//! ratings add Gaussian noise, round to the 0-5 scale, then get masked at
//! random.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{CatalogEntry, ItemCatalog, ItemKind, Rating, RatingsMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub user_clusters: usize,
    pub item_groups: usize,
    /// `user_clusters` rows of `item_groups` base ratings in `[0, 5]`.
    pub affinity: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Many small user clusters over a few item groups, with each cluster's
    /// affinities drawn uniformly from `[low, low + spread]`. Users are hard
    /// to match while items within a group are interchangeable, so the
    /// signal is carried by the item side.
    pub fn item_dominant(n_users: usize, n_items: usize, spread: f64, noise_sd: f64, seed: u64) -> Self {
        let user_clusters = (n_users / 5).max(1);
        let item_groups = 4.min(n_items).max(1);
        let low = (5.0 - spread).max(0.0) / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_aff1);
        let affinity = (0..user_clusters)
            .map(|_| (0..item_groups).map(|_| low + rng.random::<f64>() * spread).collect())
            .collect();
        Self {
            n_users,
            n_items,
            user_clusters,
            item_groups,
            affinity,
            noise_sd,
            missing_rate: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.user_clusters == 0 || self.item_groups == 0 {
            return Err(Error::invalid("synth counts must be at least 1"));
        }
        if self.affinity.len() != self.user_clusters || self.affinity.iter().any(|row| row.len() != self.item_groups) {
            return Err(Error::invalid(format!(
                "affinity table must be {} x {}",
                self.user_clusters, self.item_groups
            )));
        }
        if self.affinity.iter().flatten().any(|a| !(0.0..=5.0).contains(a)) {
            return Err(Error::invalid("affinity entries must lie in [0, 5]"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be a finite value >= 0"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::invalid("missing_rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Planted structure behind a generated matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub user_cluster: Vec<usize>,
    pub item_group: Vec<usize>,
    values: Vec<f64>,
    n_items: usize,
}

impl GroundTruth {
    /// Noise-free affinity for a cell.
    pub fn get(&self, user: usize, item: usize) -> f64 {
        self.values[user * self.n_items + item]
    }

    /// Same layout as the ratings CSV, with real-valued affinities.
    pub fn write_csv<W: Write>(&self, m: &RatingsMatrix, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(std::iter::once("user_id").chain(m.items().iter().map(String::as_str)))?;
        for (u, user) in m.users().iter().enumerate() {
            let mut record = vec![user.clone()];
            record.extend((0..self.n_items).map(|i| self.get(u, i).to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<ground truth>", e))?;
        Ok(())
    }

    /// `kind,id,cluster` rows for every user and item.
    pub fn write_assignments_csv<W: Write>(&self, m: &RatingsMatrix, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["kind", "id", "cluster"])?;
        for (id, c) in m.users().iter().zip(&self.user_cluster) {
            wtr.write_record(["user", id, &c.to_string()])?;
        }
        for (id, g) in m.items().iter().zip(&self.item_group) {
            wtr.write_record(["item", id, &g.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<assignments>", e))?;
        Ok(())
    }
}

/// Round-robin over a seeded shuffle, so cluster sizes differ by at most one.
fn balanced_assignment(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = vec![0; n];
    for (pos, idx) in order.into_iter().enumerate() {
        out[idx] = pos % k;
    }
    out
}

pub fn user_id(u: usize) -> String {
    format!("U{:04}", u + 1)
}

pub fn item_id(i: usize) -> String {
    format!("I{:02}", i + 1)
}

pub fn generate(spec: &SynthSpec) -> Result<(RatingsMatrix, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let user_cluster = balanced_assignment(spec.n_users, spec.user_clusters, &mut rng);
    let item_group = balanced_assignment(spec.n_items, spec.item_groups, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;

    let mut values = Vec::with_capacity(spec.n_users * spec.n_items);
    let mut cells = Vec::with_capacity(spec.n_users * spec.n_items);
    for &c in &user_cluster {
        for &g in &item_group {
            let base = spec.affinity[c][g];
            let observed = if spec.noise_sd > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            let score = observed.round().clamp(0.0, 5.0) as i64;
            let missing = spec.missing_rate > 0.0 && rng.random::<f64>() < spec.missing_rate;
            values.push(base);
            cells.push((!missing).then(|| Rating::new(score).expect("clamped")));
        }
    }
    let matrix = RatingsMatrix::new(
        (0..spec.n_users).map(user_id).collect(),
        (0..spec.n_items).map(item_id).collect(),
        cells,
    )?;
    Ok((
        matrix,
        GroundTruth {
            user_cluster,
            item_group,
            values,
            n_items: spec.n_items,
        },
    ))
}

/// Catalog for a generated matrix: every item a strategy labeled by group.
pub fn catalog_for(m: &RatingsMatrix, truth: &GroundTruth) -> ItemCatalog {
    let entries = m
        .items()
        .iter()
        .zip(&truth.item_group)
        .map(|(id, g)| CatalogEntry {
            item_id: id.clone(),
            kind: ItemKind::Strategy,
            label: format!("Synthetic item {id} (group {g})"),
        })
        .collect();
    ItemCatalog::new(entries, Vec::new()).expect("generated ids are unique")
}
