//! Question retrieval for community question-answering archives: language-model ranking,
//! embedding- and feedback-based query expansion, selective expansion driven by term centrality,
//! and an evaluation harness.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix the scalar.

pub mod centrality;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod num;
pub mod pipeline;
pub mod retrieval;
pub mod synth;

pub use centrality::{central_words, didf, term_centrality, CentralWordSet, CentralitySpec};
pub use corpus::{tokenize, CollectionStats, Corpus, FieldConfig, Question, TokenizerConfig};
pub use embeddings::{ContextualIndex, ContextualStore, EmbeddingTable, PseudoContextual};
pub use error::{Error, Result};
pub use eval::{average_precision, mean_average_precision, paired_t_test, split_dev_test, EvalReport, Judgments};
pub use expansion::{
    expand_almasri, expand_elmo, expand_elmo_prf, expand_kuzi, expand_prf, smm_feedback_lm, ExpandedQuery,
    ExpansionParams,
};
pub use num::Real;
pub use pipeline::{run_method, BaseMethod, Method, PipelineParams, Resources};
pub use retrieval::{kl_score, rank, LanguageModel, RankedList, Scorer, ScoringParams, TranslationTable};
pub use synth::{generate, SynthCollection, SynthSpec};

pub type LanguageModelF64 = LanguageModel<f64>;
pub type LanguageModelF32 = LanguageModel<f32>;
pub type EmbeddingTableF64 = EmbeddingTable<f64>;
pub type EmbeddingTableF32 = EmbeddingTable<f32>;
pub type ContextualStoreF64 = ContextualStore<f64>;
pub type ContextualStoreF32 = ContextualStore<f32>;
pub type ExpandedQueryF64 = ExpandedQuery<f64>;
pub type ExpandedQueryF32 = ExpandedQuery<f32>;
pub type ScoringParamsF64 = ScoringParams<f64>;
pub type ScoringParamsF32 = ScoringParams<f32>;
pub type PipelineParamsF64 = PipelineParams<f64>;
pub type PipelineParamsF32 = PipelineParams<f32>;
pub type RankedListF64 = RankedList<f64>;
pub type RankedListF32 = RankedList<f32>;
