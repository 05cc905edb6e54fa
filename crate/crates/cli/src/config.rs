//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use bilink_core::ingest::{Format, SplitMode, SplitSpec};
use bilink_core::temporal::SECONDS_PER_YEAR;
use bilink_core::{Measure, MeasureConfig};

use crate::CliError;

pub const DATA_DIR_ENV: &str = "BILINK_DATA_DIR";

/// Keys left out of the config hash: they change where or how fast a run
/// goes, not what it computes.
const UNHASHED: [&str; 2] = ["threads", "out"];

const KEYS: &[&str] = &[
    "data",
    "format",
    "split",
    "train_fraction",
    "folds",
    "seed",
    "fold",
    "measures",
    "candidate_seed",
    "ratio",
    "halflife",
    "out",
    "threads",
    "reuse_cliques",
    "katz_beta",
    "katz_max_len",
    "rpr_restart",
    "pf_max_len",
    "beta",
    "alpha",
    "temporal_max_len",
    "ts_max_len",
    "now",
    "time_unit",
    "cop_max_len",
    "cop_max_size",
    "clique_cap",
    "cluster_cap",
    "smoothing",
    "cf_k",
    "cf_min_overlap",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub format: Format,
    pub split: SplitSpec,
    /// Only this fold when set.
    pub fold: Option<usize>,
    pub measures: Vec<Measure>,
    pub candidate_seed: u64,
    pub ratio: usize,
    pub halflife: f64,
    pub out: PathBuf,
    pub threads: usize,
    pub reuse_cliques: bool,
    pub measure: MeasureConfig,
}

fn default_data() -> PathBuf {
    let dir = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    dir.join("ml-100k").join("u.data")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", k + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_kv(&text)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| CliError::Usage(format!("bad value '{v}' for {key}: {e}"))),
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key '{k}'")));
        }
        let data = map.get("data").map_or_else(default_data, PathBuf::from);
        let format: Format = get(map, "format", Format::Ml100k)?;
        let mode = match map.get("split").map(String::as_str) {
            None | Some("kfold") => SplitMode::KFold,
            Some("holdout") => SplitMode::Holdout,
            Some(other) => return Err(CliError::Usage(format!("unknown split '{other}'"))),
        };
        let d = SplitSpec::default();
        let split = SplitSpec {
            mode,
            train_fraction: get(map, "train_fraction", d.train_fraction)?,
            folds: get(map, "folds", d.folds)?,
            seed: get(map, "seed", d.seed)?,
        };
        let fold = match map.get("fold") {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("bad fold '{v}'")))?),
        };
        let measures = Measure::parse_list(map.get("measures").map_or("all", String::as_str))?;

        let mut m = MeasureConfig::default();
        m.scorer.katz_beta = get(map, "katz_beta", m.scorer.katz_beta)?;
        m.scorer.katz_max_len = get(map, "katz_max_len", m.scorer.katz_max_len)?;
        m.scorer.pr_damping = get(map, "rpr_restart", m.scorer.pr_damping)?;
        m.scorer.propflow_max_len = get(map, "pf_max_len", m.scorer.propflow_max_len)?;
        m.temporal.beta = get(map, "beta", m.temporal.beta)?;
        m.temporal.alpha = get(map, "alpha", m.temporal.alpha)?;
        m.temporal.max_len = get(map, "temporal_max_len", m.temporal.max_len)?;
        m.temporal.ts_max_len = get(map, "ts_max_len", m.temporal.ts_max_len)?;
        m.temporal.now = match map.get("now") {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("bad now '{v}'")))?),
        };
        m.temporal.time_unit = get(map, "time_unit", SECONDS_PER_YEAR)?;
        m.cop.max_len = get(map, "cop_max_len", m.cop.max_len)?;
        m.cop.max_size = get(map, "cop_max_size", m.cop.max_size)?;
        m.cop.clique_cap = get(map, "clique_cap", m.cop.clique_cap)?;
        m.cop.cluster_cap = get(map, "cluster_cap", m.cop.cluster_cap)?;
        m.cop.smoothing = get(map, "smoothing", m.cop.smoothing)?;
        m.cf.k = get(map, "cf_k", m.cf.k)?;
        m.cf.min_overlap = get(map, "cf_min_overlap", m.cf.min_overlap)?;
        m.validate()?;

        let cfg = RunConfig {
            data,
            format,
            split,
            fold,
            measures,
            candidate_seed: get(map, "candidate_seed", 42)?,
            ratio: get(map, "ratio", bilink_core::eval::DEFAULT_RATIO)?,
            halflife: get(map, "halflife", bilink_core::eval::DEFAULT_HALFLIFE)?,
            out: map.get("out").map_or_else(|| PathBuf::from("out"), PathBuf::from),
            threads: get(map, "threads", 1)?,
            reuse_cliques: get(map, "reuse_cliques", false)?,
            measure: m,
        };
        if cfg.threads == 0 {
            return Err(CliError::Usage("threads must be >= 1".into()));
        }
        if cfg.ratio == 0 {
            return Err(CliError::Usage("ratio must be >= 1".into()));
        }
        if let (Some(f), SplitMode::KFold) = (cfg.fold, cfg.split.mode) {
            if f >= cfg.split.folds {
                return Err(CliError::Usage(format!("fold {f} out of range for {} folds", cfg.split.folds)));
            }
        }
        Ok(cfg)
    }

    /// Every key with its effective value.
    pub fn canonical(&self) -> BTreeMap<&'static str, String> {
        let m = &self.measure;
        let ids: Vec<&str> = self.measures.iter().map(|m| m.id()).collect();
        let mut out = BTreeMap::new();
        out.insert("data", self.data.display().to_string());
        out.insert("format", self.format.name().to_string());
        out.insert(
            "split",
            match self.split.mode {
                SplitMode::Holdout => "holdout",
                SplitMode::KFold => "kfold",
            }
            .to_string(),
        );
        out.insert("train_fraction", self.split.train_fraction.to_string());
        out.insert("folds", self.split.folds.to_string());
        out.insert("seed", self.split.seed.to_string());
        out.insert("fold", self.fold.map_or_else(|| "all".into(), |f| f.to_string()));
        out.insert("measures", ids.join(","));
        out.insert("candidate_seed", self.candidate_seed.to_string());
        out.insert("ratio", self.ratio.to_string());
        out.insert("halflife", self.halflife.to_string());
        out.insert("out", self.out.display().to_string());
        out.insert("threads", self.threads.to_string());
        out.insert("reuse_cliques", self.reuse_cliques.to_string());
        out.insert("katz_beta", m.scorer.katz_beta.to_string());
        out.insert("katz_max_len", m.scorer.katz_max_len.to_string());
        out.insert("rpr_restart", m.scorer.pr_damping.to_string());
        out.insert("pf_max_len", m.scorer.propflow_max_len.to_string());
        out.insert("beta", m.temporal.beta.to_string());
        out.insert("alpha", m.temporal.alpha.to_string());
        out.insert("temporal_max_len", m.temporal.max_len.to_string());
        out.insert("ts_max_len", m.temporal.ts_max_len.to_string());
        out.insert("now", m.temporal.now.map_or_else(|| "latest".into(), |t| t.to_string()));
        out.insert("time_unit", m.temporal.time_unit.to_string());
        out.insert("cop_max_len", m.cop.max_len.to_string());
        out.insert("cop_max_size", m.cop.max_size.to_string());
        out.insert("clique_cap", m.cop.clique_cap.to_string());
        out.insert("cluster_cap", m.cop.cluster_cap.to_string());
        out.insert("smoothing", m.cop.smoothing.to_string());
        out.insert("cf_k", m.cf.k.to_string());
        out.insert("cf_min_overlap", m.cf.min_overlap.to_string());
        out
    }

    /// SHA-256 over the sorted `key=value` lines of the computing keys.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            if !UNHASHED.contains(&k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
