//! Collaborative-filtering recommender for study-support tools and
//! learning strategies, with the evaluation harness used to pick between
//! user-based, item-based and weighted-hybrid filtering.

pub mod config;
pub mod error;
pub mod eval;
pub mod predict;
pub mod ratings;
pub mod report;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{grid_search, EvalOptions, EvaluationReport, GridSpec, SplitSpec};
pub use predict::{predict_hybrid, predict_item_based, predict_user_based, HybridConfig, RecommendationList};
pub use ratings::{ItemCatalog, LabelMapping, Rating, RatingsMatrix};
pub use similarity::SimilarityMetric;
