//! Pipeline behind the `bilink` command: ingest, split, score, evaluate and
//! recommend.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use bilink_core::cop::{read_bcliques, write_bcliques, CopModel};
use bilink_core::eval::{self, Candidate, MetricReport};
use bilink_core::ingest::{self, read_ratings_file, write_ratings, Dataset, DatasetSummary, SplitMode};
use bilink_core::{build_graph, ItemId, Measure, Scorer, UserId};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bilink_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 1 for problems with the input or configuration, 2 for failures of
    /// the computation itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(bilink_core::Error::NotConverged { .. }) => 2,
            CliError::Core(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Runs `f` on a thread pool of the configured size.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(f)
}

pub fn load(cfg: &RunConfig) -> Result<Dataset> {
    if !cfg.data.exists() {
        return Err(CliError::Usage(format!(
            "data file {} not found (set data = ... or {})",
            cfg.data.display(),
            config::DATA_DIR_ENV
        )));
    }
    Ok(read_ratings_file(&cfg.data, cfg.format)?)
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<DatasetSummary> {
    Ok(load(cfg)?.summary())
}

/// Train/test pairs of the selected folds, tagged with the fold number.
pub fn folds(cfg: &RunConfig, data: &Dataset) -> Result<Vec<(usize, Dataset, Dataset)>> {
    let all: Vec<(Dataset, Dataset)> = match cfg.split.mode {
        SplitMode::Holdout => vec![ingest::split_holdout(data, &cfg.split)?],
        SplitMode::KFold => ingest::split_kfold(data, &cfg.split)?,
    };
    Ok(all
        .into_iter()
        .enumerate()
        .filter(|(k, _)| cfg.fold.is_none_or(|f| f == *k))
        .map(|(k, (tr, te))| (k, tr, te))
        .collect())
}

fn fold_dir(cfg: &RunConfig, k: usize) -> PathBuf {
    cfg.out.join(format!("fold{k}"))
}

/// Writes `train.data` and `test.data` for each selected fold.
pub fn cmd_split(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load(cfg)?;
    let mut written = Vec::new();
    for (k, train, test) in folds(cfg, &data)? {
        let dir = fold_dir(cfg, k);
        fs::create_dir_all(&dir)?;
        for (name, d) in [("train.data", &train), ("test.data", &test)] {
            let path = dir.join(name);
            let mut buf = Vec::new();
            write_ratings(&mut buf, d, cfg.format)?;
            fs::write(&path, buf)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub const CSV_HEADER: &str = "user,item,label,score,defined";

fn format_scores(hash: &str, pairs: &[Candidate], scores: &[Option<f64>]) -> String {
    let mut s = format!("# config {hash}\n{CSV_HEADER}\n");
    for (c, v) in pairs.iter().zip(scores) {
        s.push_str(&format!(
            "{},{},{},{:.6e},{}\n",
            c.user.0,
            c.item.0,
            c.label as u8,
            v.unwrap_or(0.0),
            v.is_some()
        ));
    }
    s
}

fn cop_model(cfg: &RunConfig, dir: &Path, g: &bilink_core::BipartiteGraph) -> Result<Option<CopModel>> {
    if !cfg.measures.iter().any(|m| matches!(m, Measure::Cop | Measure::Tcop)) {
        return Ok(None);
    }
    let cache = dir.join("bcliques.txt");
    if cfg.reuse_cliques && cache.exists() {
        let cliques = read_bcliques(std::io::BufReader::new(fs::File::open(&cache)?))?;
        info!("reusing {} cached cliques from {}", cliques.len(), cache.display());
        return Ok(Some(CopModel::from_cliques(g, &cliques)?));
    }
    let model = CopModel::new(g);
    let mut buf = format!("# config {}\n", cfg.hash()).into_bytes();
    write_bcliques(&mut buf, &model.cliques(g))?;
    fs::write(&cache, buf)?;
    Ok(Some(model))
}

/// Scores the candidate set of every selected fold with every configured
/// measure, one CSV per fold and measure.
pub fn cmd_score(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load(cfg)?;
    let hash = cfg.hash();
    let mut written = Vec::new();
    for (k, train, test) in folds(cfg, &data)? {
        let dir = fold_dir(cfg, k);
        fs::create_dir_all(&dir)?;
        let g = build_graph(&train.interactions)?;
        let cands = eval::generate_candidates(&train, &test, cfg.candidate_seed.wrapping_add(k as u64), cfg.ratio)?;
        info!(
            "fold {k}: {} train edges, {} positives, {} negatives",
            g.n_edges(),
            cands.n_positives(),
            cands.n_negatives()
        );
        let cop = cop_model(cfg, &dir, &g)?;
        let scorer = Scorer::with_cop_model(&g, cfg.measure, &cfg.measures, cop)?;
        let pairs: Vec<(UserId, ItemId)> = cands.pairs.iter().map(|c| (c.user, c.item)).collect();
        let scores = scorer.score_batch(&pairs)?;
        for (m, col) in scorer.measures().iter().zip(&scores) {
            let path = dir.join(format!("{}.csv", m.id()));
            fs::write(&path, format_scores(&hash, &cands.pairs, col))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// A scores CSV read back: config hash, candidates and optional scores.
pub struct ScoreFile {
    pub config_hash: Option<String>,
    pub pairs: Vec<Candidate>,
    pub scores: Vec<Option<f64>>,
}

pub fn read_scores(path: &Path) -> Result<ScoreFile> {
    let text = fs::read_to_string(path)?;
    let bad = |line: usize, msg: &str| CliError::Usage(format!("{}:{line}: {msg}", path.display()));
    let config_hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config "))
        .map(|h| h.trim().to_string());
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(1, &e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(bad(1, "unexpected header"));
    }
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, &e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(line, "missing field"));
        let user: u32 = field(0)?.parse().map_err(|_| bad(line, "bad user"))?;
        let item: u32 = field(1)?.parse().map_err(|_| bad(line, "bad item"))?;
        let label = match field(2)? {
            "1" => true,
            "0" => false,
            _ => return Err(bad(line, "label must be 0 or 1")),
        };
        let score: f64 = field(3)?.parse().map_err(|_| bad(line, "bad score"))?;
        let defined: bool = field(4)?.parse().map_err(|_| bad(line, "bad defined flag"))?;
        pairs.push(Candidate { user: UserId(user), item: ItemId(item), label });
        scores.push(defined.then_some(score));
    }
    Ok(ScoreFile { config_hash, pairs, scores })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: String,
    pub metrics: Vec<MetricReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub measure: String,
    pub folds: usize,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub aupr_mean: f64,
    pub aupr_std: f64,
    pub rankscore_mean: f64,
    pub rankscore_std: f64,
    pub n_undefined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: Option<String>,
    pub folds: Vec<FoldReport>,
    /// Sorted by mean AUROC, best first.
    pub summary: Vec<SummaryRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn score_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let mut folds: Vec<(String, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.starts_with("fold").then(|| (name, e.path()))
        })
        .collect();
    folds.sort_by_key(|(name, _)| (name.len(), name.clone()));
    if folds.is_empty() {
        folds.push(("all".into(), dir.to_path_buf()));
    }
    Ok(folds)
}

/// Metrics for every scores CSV under `dir`, either directly or in `fold*`
/// subdirectories.
pub fn cmd_evaluate(dir: &Path, halflife: f64) -> Result<Report> {
    let mut folds = Vec::new();
    let mut hashes: Vec<String> = Vec::new();
    for (name, path) in score_dirs(dir)? {
        let mut files: Vec<PathBuf> = fs::read_dir(&path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut metrics = Vec::new();
        let mut reference: Option<Vec<Candidate>> = None;
        for f in files {
            let measure = f.file_stem().unwrap().to_string_lossy().into_owned();
            let sf = read_scores(&f)?;
            match &reference {
                None => reference = Some(sf.pairs.clone()),
                Some(r) if *r != sf.pairs => {
                    return Err(CliError::Usage(format!(
                        "{} scores a different candidate set than its siblings",
                        f.display()
                    )))
                }
                Some(_) => {}
            }
            hashes.extend(sf.config_hash.clone());
            metrics.push(eval::evaluate(&measure, &sf.pairs, &sf.scores, halflife)?);
        }
        if !metrics.is_empty() {
            folds.push(FoldReport { fold: name, metrics });
        }
    }
    if folds.is_empty() {
        return Err(CliError::Usage(format!("no scores CSV under {}", dir.display())));
    }
    hashes.sort();
    hashes.dedup();
    if hashes.len() > 1 {
        warn!("scores come from {} different configs", hashes.len());
    }

    let mut measures: Vec<String> = folds.iter().flat_map(|f| f.metrics.iter().map(|m| m.measure.clone())).collect();
    measures.sort();
    measures.dedup();
    let mut summary: Vec<SummaryRow> = measures
        .into_iter()
        .map(|m| {
            let rows: Vec<&MetricReport> = folds.iter().flat_map(|f| f.metrics.iter().filter(|r| r.measure == m)).collect();
            let col = |f: fn(&MetricReport) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (auroc_mean, auroc_std) = col(|r| r.auroc);
            let (aupr_mean, aupr_std) = col(|r| r.aupr);
            let (rankscore_mean, rankscore_std) = col(|r| r.rankscore);
            SummaryRow {
                measure: m,
                folds: rows.len(),
                auroc_mean,
                auroc_std,
                aupr_mean,
                aupr_std,
                rankscore_mean,
                rankscore_std,
                n_undefined: rows.iter().map(|r| r.n_undefined).sum(),
            }
        })
        .collect();
    summary.sort_by(|a, b| b.auroc_mean.total_cmp(&a.auroc_mean).then(a.measure.cmp(&b.measure)));

    let report = Report {
        config_hash: (hashes.len() == 1).then(|| hashes[0].clone()),
        folds,
        summary,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;
    fs::write(dir.join("report.txt"), render_table(&report))?;
    Ok(report)
}

pub fn render_table(r: &Report) -> String {
    let mut s = String::new();
    if let Some(h) = &r.config_hash {
        s.push_str(&format!("# config {h}\n"));
    }
    s.push_str(&format!(
        "{:<8} {:>17} {:>17} {:>17} {:>9}\n",
        "measure", "AUROC", "AUPR", "Rankscore", "undefined"
    ));
    for row in &r.summary {
        let cell = |m: f64, sd: f64| format!("{m:.4} ({sd:.4})");
        s.push_str(&format!(
            "{:<8} {:>17} {:>17} {:>17} {:>9}\n",
            row.measure,
            cell(row.auroc_mean, row.auroc_std),
            cell(row.aupr_mean, row.aupr_std),
            cell(row.rankscore_mean, row.rankscore_std),
            row.n_undefined
        ));
    }
    s
}

/// Top `k` unrated items for `user` on the full dataset.
pub fn cmd_recommend(cfg: &RunConfig, user: u32, k: usize, measure: Measure) -> Result<Vec<(ItemId, Option<f64>)>> {
    let data = load(cfg)?;
    let g = build_graph(&data.interactions)?;
    let scorer = Scorer::new(&g, cfg.measure, &[measure])?;
    Ok(bilink_core::recommend(&scorer, measure, UserId(user), k)?)
}
