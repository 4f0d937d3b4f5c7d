//! Knowledge-graph-driven data augmentation for domain text.
//!
//! The pipeline links text spans to entities of a domain knowledge graph
//! ([`localize`]), rewrites texts by swapping those entities for relevant
//! alternatives found either in the graph ([`kger`]) or in other training
//! texts ([`trainer`]), and keeps the rewrites whose scorer confidence sits
//! near a target value ([`assess`]). [`pipeline`] wires the stages to files.

pub mod assess;
pub mod dataset;
pub mod embed;
pub mod kg;
pub mod kger;
pub mod localize;
pub mod pipeline;
pub mod sample;
pub mod trainer;

pub use assess::{sampling_weights, select, ConfidenceRecord, SelectionConfig, Strategy};
pub use dataset::{Dataset, InputMode, Label, LabeledText};
pub use embed::EmbeddingTable;
pub use kg::{CategoryId, EntityId, KnowledgeGraph, RelationId, Triple};
pub use localize::{find_related_pairs, LocalizeConfig, Localizer, MentionMatch, RelatedPair, TokenSpan};
pub use pipeline::{RunConfig, Toggles};
pub use sample::{AugmentedSample, Replacement, View};
