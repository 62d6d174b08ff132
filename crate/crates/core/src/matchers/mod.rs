//! Typicality matching: exhaustive search for labelings that make the
//! upper triangles jointly typical, and the seeded fingerprint matcher.

mod seeded;
mod tm;

pub use seeded::{fingerprint, stm_match, stm_match_graphs, Fingerprint, StmConfig, StmPass, StmTrace};
pub use tm::{
    default_tm_eps, tm_match_collection, tm_match_collection_graphs, tm_match_exhaustive, tm_match_graphs,
    tm_match_sbm, tm_match_sbm_blind, tm_match_sbm_blind_graphs, tm_match_sbm_graphs, TmConfig,
};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A labeling was produced.
    Matched,
    /// No candidate labeling passed the typicality test.
    NoTypicalLabeling,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchReport {
    pub model: String,
    pub n: usize,
    pub outcome: Outcome,
    /// One labeling per hidden graph, as vertex → label images.
    pub labelings: Vec<Vec<usize>>,
    /// `|Σ̂|`: number of accepted candidates.
    pub ambiguity_size: u64,
    pub eps: f64,
    pub seed: u64,
    /// Accuracy of the output against the truth, if supplied.
    pub accuracy: Option<f64>,
    /// Whether the truth was among the accepted candidates.
    pub truth_in_set: Option<bool>,
    /// Mean accuracy over all accepted candidates.
    pub mean_set_accuracy: Option<f64>,
    pub min_set_accuracy: Option<f64>,
    /// Every accepted candidate, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stm: Option<StmTrace>,
    pub wall_time_s: f64,
}

impl MatchReport {
    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &MatchReport) -> bool {
        let strip = |r: &MatchReport| {
            let mut r = r.clone();
            r.wall_time_s = 0.0;
            serde_json::to_string(&r).expect("report serialises")
        };
        strip(self) == strip(other)
    }
}
