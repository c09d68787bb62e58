//! Web-crawl corpus curation: WARC extraction, heuristic cleaning, MinHash
//! near-duplicate removal, safety and quality gating, and corpus metrics.

pub mod corpus;
pub mod extract;
pub mod heuristic;
pub mod langid;
pub mod metrics;
pub mod minhash;
pub mod pipeline;
pub mod quality;
pub mod safety;
pub mod text;
pub mod warc;

pub use corpus::{Document, FilterOutcome, RecordError, Stage, StageStats};
pub use heuristic::{HeuristicConfig, HeuristicFilter, RuleId};
pub use minhash::{BandingPlan, DupCluster, MinHashSignature, MinHasher};
pub use quality::{FluencyWeights, QualityAnnotations, SelectionConfig};
pub use safety::{SafetyAnnotations, SafetyGate, Scorer};
pub use text::{Tokenizer, WhitespaceTokenizer};
