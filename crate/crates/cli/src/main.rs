use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use studyrec_core::config::RunConfig;
use studyrec_core::eval::{evaluate_config, grid_search, split_users};
use studyrec_core::predict::{
    cold_start_profile, format_alpha, parse_alpha, partition_responses, predict_hybrid, read_profile_csv, HybridConfig,
};
use studyrec_core::ratings::{filter_items, ingest_csv, Dataset, ItemCatalog, LabelMapping, RatingsMatrix};
use studyrec_core::report::{write_report_files, BestConfig, BEST_CONFIG_JSON};
use studyrec_core::similarity::SimilarityMetric;
use studyrec_core::synth::{self, SynthSpec};

const EFFECTIVE_CONFIG: &str = "effective_config.toml";
const CATALOG_CSV: &str = "catalog.csv";

/// Study-support recommender: ingest questionnaire ratings, search the
/// hybrid model grid and recommend tools and strategies to new users.
#[derive(Parser, Debug)]
#[command(name = "studyrec", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cutoff for precision and recall at k.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// User-based weight; a comma list restricts the grid.
    #[arg(long, global = true, value_delimiter = ',', value_parser = alpha_arg)]
    alpha: Vec<f64>,
    /// pearson, euclidean or cosine; a comma list restricts the grid.
    #[arg(long, global = true, value_delimiter = ',', value_parser = metric_arg)]
    metric: Vec<SimilarityMetric>,
    /// Neighbor count; a comma list restricts the grid.
    #[arg(long, global = true, value_delimiter = ',')]
    neighbors: Vec<usize>,
    /// Minimum actual rating for an item to count as relevant.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Ratings CSV (first column user_id).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Item catalog CSV (item_id,kind,label).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Drop items with a larger fraction of missing answers.
    #[arg(long)]
    max_missing: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic matrix with planted user clusters and item groups.
    Synth {
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 38)]
        items: usize,
        /// Range of the cluster affinities on the 0-5 scale.
        #[arg(long, default_value_t = 4.0)]
        spread: f64,
        /// Standard deviation of the rating noise.
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
    },
    /// Parse, validate and filter a ratings CSV.
    Ingest(DataArgs),
    /// Split users into training and test sets.
    Split {
        #[command(flatten)]
        data: DataArgs,
        /// Exact number of training users instead of the fraction.
        #[arg(long)]
        train_count: Option<usize>,
    },
    /// Cross-validated search over metric, neighbor count and weight.
    Gridsearch {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        train_count: Option<usize>,
    },
    /// Score one fixed configuration on the test users.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        train_count: Option<usize>,
        /// best_config.json from a previous grid search.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Recommend items for a new user from questionnaire answers.
    Recommend {
        #[command(flatten)]
        data: DataArgs,
        /// Answers as item_id,response rows.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of recommendations to print; defaults to k.
        #[arg(long)]
        top_k: Option<usize>,
    },
}

fn alpha_arg(s: &str) -> Result<f64, String> {
    parse_alpha(s).map_err(|e| e.to_string())
}

fn metric_arg(s: &str) -> Result<SimilarityMetric, String> {
    s.parse().map_err(|e: studyrec_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    apply_global(&mut cfg, &cli.global);
    match cli.command {
        Command::Synth {
            users,
            items,
            spread,
            noise,
        } => synth_cmd(cfg, &cli.global, users, items, spread, noise),
        Command::Ingest(data) => {
            apply_data(&mut cfg, &data);
            ingest_cmd(cfg)
        }
        Command::Split { data, train_count } => {
            apply_data(&mut cfg, &data);
            cfg.split.train_count = train_count.or(cfg.split.train_count);
            split_cmd(cfg)
        }
        Command::Gridsearch { data, train_count } => {
            apply_data(&mut cfg, &data);
            cfg.split.train_count = train_count.or(cfg.split.train_count);
            apply_grid(&mut cfg, &cli.global);
            gridsearch_cmd(cfg)
        }
        Command::Evaluate {
            data,
            train_count,
            model,
        } => {
            apply_data(&mut cfg, &data);
            cfg.split.train_count = train_count.or(cfg.split.train_count);
            resolve_model(&mut cfg, &cli.global, model.as_deref())?;
            evaluate_cmd(cfg)
        }
        Command::Recommend {
            data,
            profile,
            model,
            top_k,
        } => {
            apply_data(&mut cfg, &data);
            resolve_model(&mut cfg, &cli.global, model.as_deref())?;
            recommend_cmd(cfg, &profile, top_k)
        }
    }
}

fn apply_global(cfg: &mut RunConfig, g: &Global) {
    if let Some(seed) = g.seed {
        cfg.split.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    if let Some(k) = g.k {
        cfg.k = k;
    }
    if let Some(t) = g.threshold {
        cfg.threshold = t;
    }
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs) {
    if let Some(d) = &data.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(c) = &data.catalog {
        cfg.catalog = Some(c.clone());
    }
    if let Some(m) = data.max_missing {
        cfg.max_missing_fraction = m;
    }
}

fn apply_grid(cfg: &mut RunConfig, g: &Global) {
    if !g.metric.is_empty() {
        cfg.grid.metrics = g.metric.clone();
    }
    if !g.neighbors.is_empty() {
        cfg.grid.neighbor_counts = g.neighbors.clone();
    }
    if !g.alpha.is_empty() {
        cfg.grid.alphas = g.alpha.clone();
    }
}

fn single<T: Copy>(values: &[T], flag: &str) -> Result<Option<T>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => bail!("--{flag} takes a single value for this command"),
    }
}

/// Model precedence: explicit file, then the config's `[model]`, then a
/// best_config.json left in the output directory. Flags override fields.
fn resolve_model(cfg: &mut RunConfig, g: &Global, model: Option<&Path>) -> Result<()> {
    let default_path = cfg.out.join(BEST_CONFIG_JSON);
    let mut resolved = match model {
        Some(path) => Some(BestConfig::from_path(path)?.config),
        None if cfg.model.is_some() => cfg.model,
        None if default_path.exists() => Some(BestConfig::from_path(&default_path)?.config),
        None => None,
    };
    let metric = single(&g.metric, "metric")?;
    let neighbors = single(&g.neighbors, "neighbors")?;
    let alpha = single(&g.alpha, "alpha")?;
    resolved = match (resolved, metric, neighbors, alpha) {
        (Some(mut m), metric, neighbors, alpha) => {
            m.metric = metric.unwrap_or(m.metric);
            m.n_neighbors = neighbors.unwrap_or(m.n_neighbors);
            m.alpha = alpha.unwrap_or(m.alpha);
            Some(m)
        }
        (None, Some(metric), Some(n), Some(alpha)) => Some(HybridConfig::new(metric, n, alpha)?),
        (None, ..) => {
            bail!("no model: pass --model, a [model] config section, or all of --metric, --neighbors and --alpha")
        }
    };
    cfg.model = resolved;
    Ok(())
}

fn create_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))
}

fn write_effective_config(cfg: &RunConfig) -> Result<PathBuf> {
    let path = cfg.out.join(EFFECTIVE_CONFIG);
    fs::write(&path, cfg.to_toml_string()?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_matrix(m: &RatingsMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    m.write_csv(file)?;
    Ok(())
}

/// The configured catalog, else a catalog.csv beside the dataset, else the
/// built-in questionnaire catalog.
fn load_catalog(cfg: &RunConfig, dataset: &Path) -> Result<ItemCatalog> {
    if let Some(path) = &cfg.catalog {
        return Ok(ItemCatalog::from_path(path)?);
    }
    let sibling = dataset.with_file_name(CATALOG_CSV);
    if sibling.exists() && sibling != dataset {
        return Ok(ItemCatalog::from_path(&sibling)?);
    }
    Ok(ItemCatalog::questionnaire())
}

struct Loaded {
    dataset: Dataset,
    ratings: RatingsMatrix,
    removed: Vec<String>,
    catalog: ItemCatalog,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    let Some(path) = &cfg.dataset else {
        bail!("no dataset: pass --dataset or set `dataset` in the config");
    };
    let catalog = load_catalog(cfg, path)?;
    let dataset = ingest_csv(path, &LabelMapping::questionnaire(), &catalog)?;
    let (ratings, removed) = filter_items(&dataset.ratings, cfg.max_missing_fraction)?;
    Ok(Loaded {
        dataset,
        ratings,
        removed,
        catalog,
    })
}

fn synth_cmd(mut cfg: RunConfig, g: &Global, users: usize, items: usize, spread: f64, noise: f64) -> Result<()> {
    let spec = match cfg.synth.take() {
        Some(spec) => SynthSpec {
            seed: g.seed.unwrap_or(spec.seed),
            ..spec
        },
        None => SynthSpec::item_dominant(users, items, spread, noise, cfg.split.seed),
    };
    let (m, truth) = synth::generate(&spec)?;
    create_out(&cfg)?;
    let ratings = cfg.out.join("ratings.csv");
    write_matrix(&m, &ratings)?;
    let write = |name: &str, f: &dyn Fn(fs::File) -> studyrec_core::Result<()>| -> Result<()> {
        let path = cfg.out.join(name);
        f(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
        Ok(())
    };
    write("ground_truth.csv", &|f| truth.write_csv(&m, f))?;
    write("assignments.csv", &|f| truth.write_assignments_csv(&m, f))?;
    write(CATALOG_CSV, &|f| synth::catalog_for(&m, &truth).write_csv(f))?;
    cfg.synth = Some(spec);
    cfg.dataset = Some(ratings.clone());
    write_effective_config(&cfg)?;
    println!(
        "wrote {} users x {} items ({:.1}% missing) to {}",
        m.n_users(),
        m.n_items(),
        100.0 * (1.0 - m.present_count() as f64 / (m.n_users() * m.n_items()) as f64),
        ratings.display()
    );
    Ok(())
}

fn ingest_cmd(cfg: RunConfig) -> Result<()> {
    let loaded = load(&cfg)?;
    create_out(&cfg)?;
    write_matrix(&loaded.ratings, &cfg.out.join("ratings.csv"))?;
    if loaded.dataset.difficulties.n_items() > 0 {
        write_matrix(&loaded.dataset.difficulties, &cfg.out.join("difficulties.csv"))?;
    }
    let catalog = loaded.catalog.restrict_to(loaded.ratings.items())?;
    catalog.write_csv(fs::File::create(cfg.out.join(CATALOG_CSV))?)?;
    write_effective_config(&cfg)?;
    println!(
        "{} users x {} items, {} difficulty columns",
        loaded.ratings.n_users(),
        loaded.ratings.n_items(),
        loaded.dataset.difficulties.n_items()
    );
    if !loaded.removed.is_empty() {
        println!(
            "removed (more than {}% missing): {}",
            cfg.max_missing_fraction * 100.0,
            loaded.removed.join(", ")
        );
    }
    Ok(())
}

fn split_cmd(cfg: RunConfig) -> Result<()> {
    let loaded = load(&cfg)?;
    let (train, test) = split_users(&loaded.ratings, &cfg.split)?;
    create_out(&cfg)?;
    write_matrix(&train, &cfg.out.join("train.csv"))?;
    write_matrix(&test, &cfg.out.join("test.csv"))?;
    write_effective_config(&cfg)?;
    println!("train {} users, test {} users", train.n_users(), test.n_users());
    Ok(())
}

fn gridsearch_cmd(cfg: RunConfig) -> Result<()> {
    let loaded = load(&cfg)?;
    let report = grid_search(&loaded.ratings, &cfg.split, &cfg.grid, &cfg.options())?;
    create_out(&cfg)?;
    write_report_files(&report, &cfg.out)?;
    write_effective_config(&cfg)?;
    let best = &report.best_row;
    println!(
        "best: metric={} n={} alpha={} mae={:.4} test_mae={:.4}",
        best.metric, best.n_neighbors, best.alpha_label, best.cv_mae, best.test_mae
    );
    println!(
        "{} configurations, baseline test mae {:.4}, reports in {}",
        report.rows.len(),
        report.baseline_test_mae,
        cfg.out.display()
    );
    Ok(())
}

fn evaluate_cmd(cfg: RunConfig) -> Result<()> {
    let loaded = load(&cfg)?;
    let model = cfg.model.expect("resolved before dispatch");
    let result = evaluate_config(&loaded.ratings, &cfg.split, &model, &cfg.options())?;
    create_out(&cfg)?;
    let path = cfg.out.join("evaluation.json");
    fs::write(&path, serde_json::to_string_pretty(&result)? + "\n")?;
    write_effective_config(&cfg)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!("{model}");
    println!(
        "mae={:.4} rel_err={} precision@{k}={} recall@{k}={} baseline_mae={:.4}",
        result.test_mae,
        opt(result.relative_error),
        opt(result.precision_at_k),
        opt(result.recall_at_k),
        result.baseline_test_mae,
        k = cfg.k,
    );
    Ok(())
}

fn recommend_cmd(cfg: RunConfig, profile_path: &Path, top_k: Option<usize>) -> Result<()> {
    let loaded = load(&cfg)?;
    let model = cfg.model.expect("resolved before dispatch");
    let top_k = top_k.unwrap_or(cfg.k);
    if top_k == 0 {
        bail!("--top-k must be at least 1");
    }
    let file = fs::File::open(profile_path).with_context(|| format!("opening {}", profile_path.display()))?;
    let responses = read_profile_csv(file)?;

    // difficulty answers and filtered-out items are not rating cells
    let catalog = &loaded.catalog;
    let removed = &loaded.removed;
    let (kept, dropped) = partition_responses(&responses, |id| {
        !catalog.is_difficulty(id) && !removed.iter().any(|r| r == id)
    });
    let profile = cold_start_profile(&kept, &LabelMapping::questionnaire(), loaded.ratings.items())?;
    let missing: Vec<usize> = (0..profile.len()).filter(|&i| profile[i].is_none()).collect();

    let recs = if missing.is_empty() {
        println!("profile answers every item; nothing to recommend");
        Vec::new()
    } else {
        predict_hybrid(&profile, &loaded.ratings, &missing, &model)?
            .top(top_k)
            .to_vec()
    };

    for (rank, r) in recs.iter().enumerate() {
        let label = catalog.get(&r.item_id).map_or("", |e| e.label.as_str());
        println!("{:>2}. {:<4} {:.3}  {}", rank + 1, r.item_id, r.predicted_rating, label);
    }
    let entries: Vec<_> = recs
        .iter()
        .map(|r| {
            json!({
                "item_id": r.item_id,
                "label": catalog.get(&r.item_id).map(|e| e.label.clone()),
                "predicted_rating": r.predicted_rating,
                "source": r.source,
            })
        })
        .collect();
    let doc = json!({
        "model": {
            "metric": model.metric,
            "n_neighbors": model.n_neighbors,
            "alpha": model.alpha,
            "alpha_label": format_alpha(model.alpha),
        },
        "ignored_answers": dropped,
        "recommendations": entries,
    });
    create_out(&cfg)?;
    fs::write(
        cfg.out.join("recommendations.json"),
        serde_json::to_string_pretty(&doc)? + "\n",
    )?;
    write_effective_config(&cfg)?;
    Ok(())
}
