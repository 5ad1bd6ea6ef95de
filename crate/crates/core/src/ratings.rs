//! Rating matrix data model and questionnaire ingestion.
//!
//! A [`RatingsMatrix`] is a users x items grid of optional Likert scores in
//! `0..=5`. Questionnaire answers are turned into scores by a
//! [`LabelMapping`]; "never tried" and "I don't know" answers, as well as
//! empty cells, become missing cells.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default threshold for [`filter_items`]: items missing for more than 48% of
/// the respondents are dropped.
pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.48;

/// A single Likert score in `0..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub const MIN: Rating = Rating(0);
    pub const MAX: Rating = Rating(5);

    pub fn new(value: i64) -> Result<Self> {
        if (0..=5).contains(&value) {
            Ok(Rating(value as u8))
        } else {
            Err(Error::RatingOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u8> for Rating {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Rating::new(i64::from(value))
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Result of looking up one questionnaire cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Score(Rating),
    Missing,
}

impl Cell {
    pub fn rating(self) -> Option<Rating> {
        match self {
            Cell::Score(r) => Some(r),
            Cell::Missing => None,
        }
    }
}

/// Association from questionnaire answer labels to scores.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMapping {
    scored: Vec<(String, Rating)>,
    sentinels: Vec<String>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        Self::questionnaire()
    }
}

impl LabelMapping {
    /// The six usefulness labels in score order plus the two "missing"
    /// sentinels.
    pub fn questionnaire() -> Self {
        let scored = ["not at all", "very little", "little", "medium", "much", "very much"]
            .iter()
            .enumerate()
            .map(|(score, label)| (label.to_string(), Rating(score as u8)))
            .collect();
        Self {
            scored,
            sentinels: vec!["never tried".into(), "I don't know".into()],
        }
    }

    /// Builds a custom mapping. Scores must be distinct and cover `0..=5`.
    pub fn new(scored: Vec<(String, Rating)>, sentinels: Vec<String>) -> Result<Self> {
        let mut seen = [false; 6];
        for (_, r) in &scored {
            if std::mem::replace(&mut seen[r.0 as usize], true) {
                return Err(Error::invalid(format!("score {r} mapped twice")));
            }
        }
        if scored.len() != 6 || !seen.iter().all(|s| *s) {
            return Err(Error::invalid("label mapping must cover scores 0..=5"));
        }
        let mut labels = HashSet::new();
        for label in scored.iter().map(|(l, _)| l).chain(&sentinels) {
            if !labels.insert(normalize(label)) {
                return Err(Error::invalid(format!("label {label:?} listed twice")));
            }
        }
        Ok(Self { scored, sentinels })
    }

    pub fn scored_labels(&self) -> impl Iterator<Item = (&str, Rating)> {
        self.scored.iter().map(|(l, r)| (l.as_str(), *r))
    }

    pub fn sentinels(&self) -> impl Iterator<Item = &str> {
        self.sentinels.iter().map(String::as_str)
    }

    /// Looks up a label. Matching ignores case, surrounding whitespace and
    /// the apostrophe style.
    pub fn lookup(&self, label: &str) -> Option<Cell> {
        let key = normalize(label);
        if let Some((_, r)) = self.scored.iter().find(|(l, _)| normalize(l) == key) {
            return Some(Cell::Score(*r));
        }
        self.sentinels
            .iter()
            .any(|s| normalize(s) == key)
            .then_some(Cell::Missing)
    }

    /// Parses one CSV cell: an empty cell, a label, or an integer score.
    pub fn parse_cell(&self, raw: &str) -> Option<Cell> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Some(Cell::Missing);
        }
        if let Ok(v) = trimmed.parse::<i64>() {
            return Rating::new(v).ok().map(Cell::Score);
        }
        self.lookup(trimmed)
    }

    pub fn label_for(&self, rating: Rating) -> &str {
        self.scored
            .iter()
            .find(|(_, r)| *r == rating)
            .map(|(l, _)| l.as_str())
            .expect("mapping covers every score")
    }
}

fn normalize(label: &str) -> String {
    label.trim().replace('\u{2019}', "'").to_lowercase()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Tool,
    Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub item_id: String,
    pub kind: ItemKind,
    pub label: String,
}

/// Items that can be recommended, plus the difficulty questions that are
/// collected alongside them but never enter the recommendation matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemCatalog {
    entries: Vec<CatalogEntry>,
    difficulties: Vec<(String, String)>,
}

const TOOLS: [&str; 17] = [
    "Human voice audio book",
    "Robotic voice audio book",
    "Different colour words",
    "Using the EasyReading font",
    "Using a smart pen or tablet to take notes and record voice",
    "Clearer layout of the study material",
    "Having the key words of the text highlighted",
    "Prepared concept maps",
    "Prepared schemes",
    "Prepared summaries",
    "E-Books",
    "Digital tutor",
    "Images to help understand the meaning of difficult words",
    "Images that help to memorise a concept",
    "Audio recording of lessons",
    "Video lessons",
    "Supplementing study material with internet research",
];

const STRATEGIES: [&str; 22] = [
    "A person reading for him/her",
    "A map made by himself/herself",
    "A scheme made by himself/herself",
    "A summary made by himself/herself",
    "Repeat the studied material",
    "Marking keywords",
    "Underlining with different colours",
    "Having a study group",
    "Having a tutor",
    "Dyslexic student group to exchange resources",
    "Presential lessons",
    "Online lessons available",
    "Taking breaks during lessons",
    "Lesson slides available",
    "Recording the lesson",
    "Taking notes",
    "Having the lesson plan in advance",
    "Dividing an examination/task/question into several parts",
    "Only written tests",
    "Only oral tests",
    "Conducting the exams in the presence of the professor alone",
    "Having an online database with notes made by other students",
];

const DIFFICULTIES: [&str; 12] = [
    "Reading",
    "Writing",
    "Understanding difficult words",
    "Understanding the lessons",
    "Concentration",
    "Paying attention during presential lessons",
    "Paying attention during online lessons",
    "Memorising recently studied concepts",
    "Remembering concepts studied during the exam",
    "Study time management",
    "Taking notes",
    "Limited time available to prepare a task/question/exam",
];

impl ItemCatalog {
    pub fn new(entries: Vec<CatalogEntry>, difficulties: Vec<(String, String)>) -> Result<Self> {
        let mut ids = HashSet::new();
        for id in entries
            .iter()
            .map(|e| &e.item_id)
            .chain(difficulties.iter().map(|d| &d.0))
        {
            if !ids.insert(id.as_str()) {
                return Err(Error::DuplicateItem(id.clone()));
            }
        }
        Ok(Self { entries, difficulties })
    }

    /// The 17 support tools (T1-T17), 22 learning strategies (S1-S22) and 12
    /// difficulties (P1-P12) of the dyslexia study-support questionnaire.
    pub fn questionnaire() -> Self {
        let tools = TOOLS.iter().enumerate().map(|(i, l)| CatalogEntry {
            item_id: format!("T{}", i + 1),
            kind: ItemKind::Tool,
            label: l.to_string(),
        });
        let strategies = STRATEGIES.iter().enumerate().map(|(i, l)| CatalogEntry {
            item_id: format!("S{}", i + 1),
            kind: ItemKind::Strategy,
            label: l.to_string(),
        });
        let difficulties = DIFFICULTIES
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("P{}", i + 1), l.to_string()))
            .collect();
        Self {
            entries: tools.chain(strategies).collect(),
            difficulties,
        }
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn difficulties(&self) -> &[(String, String)] {
        &self.difficulties
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.item_id == item_id)
    }

    pub fn is_difficulty(&self, item_id: &str) -> bool {
        self.difficulties.iter().any(|(id, _)| id == item_id)
    }

    /// Keeps only the entries whose ids appear in `item_ids`, in that order.
    pub fn restrict_to(&self, item_ids: &[String]) -> Result<Self> {
        let entries = item_ids
            .iter()
            .map(|id| self.get(id).cloned().ok_or_else(|| Error::UnknownItem(id.clone())))
            .collect::<Result<_>>()?;
        Ok(Self {
            entries,
            difficulties: self.difficulties.clone(),
        })
    }

    /// Reads a catalog CSV with columns `item_id,kind,label`. `kind` is one
    /// of `tool`, `strategy` or `difficulty`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        let mut difficulties = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Malformed(format!(
                    "catalog line {} must have 3 fields",
                    record.position().map_or(0, |p| p.line())
                )));
            }
            let (id, kind, label) = (&record[0], &record[1], &record[2]);
            match kind.to_lowercase().as_str() {
                "tool" => entries.push(CatalogEntry {
                    item_id: id.into(),
                    kind: ItemKind::Tool,
                    label: label.into(),
                }),
                "strategy" => entries.push(CatalogEntry {
                    item_id: id.into(),
                    kind: ItemKind::Strategy,
                    label: label.into(),
                }),
                "difficulty" => difficulties.push((id.to_string(), label.to_string())),
                other => return Err(Error::Malformed(format!("unknown item kind {other:?}"))),
            }
        }
        Self::new(entries, difficulties)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["item_id", "kind", "label"])?;
        for e in &self.entries {
            let kind = match e.kind {
                ItemKind::Tool => "tool",
                ItemKind::Strategy => "strategy",
            };
            wtr.write_record([e.item_id.as_str(), kind, e.label.as_str()])?;
        }
        for (id, label) in &self.difficulties {
            wtr.write_record([id.as_str(), "difficulty", label.as_str()])?;
        }
        wtr.flush().map_err(|e| Error::io("<catalog>", e))?;
        Ok(())
    }
}

/// Users x items grid of optional ratings, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingsMatrix {
    users: Vec<String>,
    items: Vec<String>,
    cells: Vec<Option<Rating>>,
}

impl RatingsMatrix {
    pub fn new(users: Vec<String>, items: Vec<String>, cells: Vec<Option<Rating>>) -> Result<Self> {
        if cells.len() != users.len() * items.len() {
            return Err(Error::ShapeMismatch {
                rows: users.len(),
                cols: items.len(),
                cells: cells.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = users.iter().find(|u| !seen.insert(u.as_str())) {
            return Err(Error::DuplicateUser(dup.clone()));
        }
        seen.clear();
        if let Some(dup) = items.iter().find(|i| !seen.insert(i.as_str())) {
            return Err(Error::DuplicateItem(dup.clone()));
        }
        Ok(Self { users, items, cells })
    }

    pub fn from_rows(users: Vec<String>, items: Vec<String>, rows: Vec<Vec<Option<Rating>>>) -> Result<Self> {
        let n_items = items.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n_items) {
            return Err(Error::LengthMismatch(bad.len(), n_items));
        }
        if rows.len() != users.len() {
            return Err(Error::ShapeMismatch {
                rows: users.len(),
                cols: n_items,
                cells: rows.len() * n_items,
            });
        }
        Self::new(users, items, rows.into_iter().flatten().collect())
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn get(&self, user: usize, item: usize) -> Option<Rating> {
        self.cells[user * self.items.len() + item]
    }

    pub fn row(&self, user: usize) -> &[Option<Rating>] {
        let n = self.items.len();
        &self.cells[user * n..(user + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<Rating>]> {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    pub fn column(&self, item: usize) -> impl Iterator<Item = Option<Rating>> + '_ {
        (0..self.n_users()).map(move |u| self.get(u, item))
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.users.iter().position(|u| u == user_id)
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item_id)
    }

    pub fn present_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn missing_fraction(&self, item: usize) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        let missing = self.column(item).filter(Option::is_none).count();
        missing as f64 / self.users.len() as f64
    }

    /// Users without a single rating. They are kept; predictors serve them
    /// through the fallback cascade.
    pub fn unrated_users(&self) -> Vec<usize> {
        (0..self.n_users())
            .filter(|&u| self.row(u).iter().all(Option::is_none))
            .collect()
    }

    pub fn global_mean(&self) -> Option<f64> {
        mean(self.cells.iter().flatten().map(|r| r.as_f64()))
    }

    pub fn item_mean(&self, item: usize) -> Option<f64> {
        mean(self.column(item).flatten().map(Rating::as_f64))
    }

    pub fn user_mean(&self, user: usize) -> Option<f64> {
        mean(self.row(user).iter().flatten().map(|r| r.as_f64()))
    }

    /// Sub-matrix with the given user rows, in the given order.
    pub fn select_users(&self, users: &[usize]) -> RatingsMatrix {
        let cells = users.iter().flat_map(|&u| self.row(u).iter().copied()).collect();
        RatingsMatrix {
            users: users.iter().map(|&u| self.users[u].clone()).collect(),
            items: self.items.clone(),
            cells,
        }
    }

    /// Sub-matrix with the given item columns, in the given order.
    pub fn select_items(&self, items: &[usize]) -> RatingsMatrix {
        let cells = (0..self.n_users())
            .flat_map(|u| items.iter().map(move |&i| self.get(u, i)))
            .collect();
        RatingsMatrix {
            users: self.users.clone(),
            items: items.iter().map(|&i| self.items[i].clone()).collect(),
            cells,
        }
    }

    /// Appends a row for a query user. The id is not checked for uniqueness.
    pub(crate) fn with_user_row(&self, user_id: &str, row: &[Option<Rating>]) -> RatingsMatrix {
        debug_assert_eq!(row.len(), self.n_items());
        let mut out = self.clone();
        out.users.push(user_id.to_string());
        out.cells.extend_from_slice(row);
        out
    }

    /// Writes the matrix as CSV: `user_id` then one column per item, cells as
    /// integer scores, missing cells empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(std::iter::once("user_id").chain(self.items.iter().map(String::as_str)))?;
        for (u, user) in self.users.iter().enumerate() {
            let mut record = Vec::with_capacity(self.n_items() + 1);
            record.push(user.clone());
            record.extend(self.row(u).iter().map(|c| c.map(|r| r.to_string()).unwrap_or_default()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<ratings>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Output of [`ingest_csv`]: the recommendation matrix and, separately, any
/// difficulty scores found in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ratings: RatingsMatrix,
    pub difficulties: RatingsMatrix,
}

/// Reads a questionnaire export from `path`. See [`read_ratings_csv`].
pub fn ingest_csv(path: &Path, mapping: &LabelMapping, catalog: &ItemCatalog) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::DatasetNotFound(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings_csv(file, mapping, Some(catalog))
}

/// Parses a ratings CSV. The first column is `user_id`, the remaining columns
/// are item ids. With a catalog, every item column must be a catalog entry or
/// a difficulty; difficulty columns are routed to [`Dataset::difficulties`].
/// Without one, every column is a recommendation item.
pub fn read_ratings_csv<R: Read>(reader: R, mapping: &LabelMapping, catalog: Option<&ItemCatalog>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("user_id") {
        return Err(Error::Malformed("first column must be user_id".into()));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut item_cols = Vec::new();
    let mut difficulty_cols = Vec::new();
    for (c, id) in columns.iter().enumerate() {
        match catalog {
            Some(cat) if cat.is_difficulty(id) => difficulty_cols.push(c),
            Some(cat) if cat.get(id).is_none() => return Err(Error::UnknownItem(id.clone())),
            _ => item_cols.push(c),
        }
    }

    let mut users = Vec::new();
    let mut cells = Vec::new();
    let mut difficulty_cells = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        users.push(record[0].trim().to_string());
        let parsed = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, raw)| {
                mapping
                    .parse_cell(raw)
                    .map(Cell::rating)
                    .ok_or_else(|| Error::UnknownLabel {
                        row: row + 1,
                        column: columns[c].clone(),
                        label: raw.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.extend(item_cols.iter().map(|&c| parsed[c]));
        difficulty_cells.extend(difficulty_cols.iter().map(|&c| parsed[c]));
    }
    let pick = |cols: &[usize]| cols.iter().map(|&c| columns[c].clone()).collect::<Vec<_>>();
    Ok(Dataset {
        ratings: RatingsMatrix::new(users.clone(), pick(&item_cols), cells)?,
        difficulties: RatingsMatrix::new(users, pick(&difficulty_cols), difficulty_cells)?,
    })
}

/// Drops every item whose fraction of missing cells strictly exceeds
/// `max_missing_fraction`. Returns the surviving matrix and the removed ids.
pub fn filter_items(m: &RatingsMatrix, max_missing_fraction: f64) -> Result<(RatingsMatrix, Vec<String>)> {
    if !(0.0..=1.0).contains(&max_missing_fraction) {
        return Err(Error::invalid(format!(
            "max_missing_fraction {max_missing_fraction} outside [0, 1]"
        )));
    }
    let (keep, removed): (Vec<usize>, Vec<usize>) =
        (0..m.n_items()).partition(|&i| m.missing_fraction(i) <= max_missing_fraction);
    if keep.is_empty() {
        return Err(Error::NothingToRecommend(max_missing_fraction));
    }
    let removed = removed.into_iter().map(|i| m.items()[i].clone()).collect();
    Ok((m.select_items(&keep), removed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Fill with the user's own mean rating.
    ByUser,
    /// Fill with the item's mean rating.
    ByItem,
}

/// Dense row-major grid of real values.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, c)).collect()
    }
}

/// Replaces each missing cell with the mean of the present ratings along
/// `axis`. Rows or columns with no ratings at all fall back to the global
/// mean.
pub fn impute(m: &RatingsMatrix, axis: Axis) -> Result<DenseMatrix> {
    let global = m.global_mean().ok_or(Error::NoRatings)?;
    let fills: Vec<f64> = match axis {
        Axis::ByUser => (0..m.n_users()).map(|u| m.user_mean(u).unwrap_or(global)).collect(),
        Axis::ByItem => (0..m.n_items()).map(|i| m.item_mean(i).unwrap_or(global)).collect(),
    };
    let mut data = Vec::with_capacity(m.n_users() * m.n_items());
    for u in 0..m.n_users() {
        for (i, cell) in m.row(u).iter().enumerate() {
            let fill = match axis {
                Axis::ByUser => fills[u],
                Axis::ByItem => fills[i],
            };
            data.push(cell.map_or(fill, Rating::as_f64));
        }
    }
    Ok(DenseMatrix {
        n_rows: m.n_users(),
        n_cols: m.n_items(),
        data,
    })
}
