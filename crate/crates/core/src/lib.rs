//! Link prediction on user–item bipartite graphs with timestamped ratings.
//!
//! Topological and temporal path scores, a probabilistic co-occurrence score
//! from local Markov random fields, collaborative-filtering baselines and
//! ranking metrics, all over one shared [`BipartiteGraph`].

pub mod batch;
pub mod cf;
pub mod cop;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod eval;
pub mod ingest;
pub mod measure;
pub mod temporal;
pub mod topo;

pub use cop::{
    brute_force_joint, compute_bcns, extract_bcliques, infer_joint, score_cop, score_tcop, BClique,
    CliquePotential, CopConfig, CopModel, JunctionTree, LocalMRF,
};
pub use batch::{recommend, Scorer};
pub use cf::{predict_item_cf, predict_user_cf, similarity_items, similarity_users, CfConfig, CfModel};
pub use error::{Error, Result};
pub use graph::{build_graph, BipartiteGraph, Interaction, ItemId, Node, Path, UserId};
pub use eval::{aupr, auroc, evaluate, generate_candidates, rankscore, Candidate, CandidateSet, MetricReport};
pub use ingest::{Dataset, DatasetSummary, Format, SplitMode, SplitSpec};
pub use measure::{Measure, MeasureConfig};
pub use temporal::{score_link_score, score_tflow, score_time_score, TemporalConfig};
pub use topo::{
    score_aa, score_cn, score_jc, score_katz, score_pa, score_propflow, score_rpr, ScorerConfig,
};
