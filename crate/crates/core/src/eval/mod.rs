//! Temporal link prediction on learned embeddings.

pub mod attention;
pub mod classifier;
pub mod metrics;
pub mod ranking;

pub use attention::{attention_report, AttentionEntry, AttentionReport};
pub use classifier::{sample_pairs, train_classifier, ClassifierConfig, ClassifierScorer, LinkClassifier, PairPool};
pub use metrics::{average_precision, mean_std, reciprocal_rank, spearman};
pub use ranking::{evaluate, EvalOptions, NodeResult, PairScorer, RankingResult, TableScorer, TimestampResult};
