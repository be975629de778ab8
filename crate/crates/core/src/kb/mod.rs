//! In-memory knowledge base: interned symbols, typed literals, and the
//! subject / object / predicate indexes behind every admissible-action query.

mod literal;
mod load;
mod store;

pub use literal::{days_in_month, Comparator, Datetime, Literal, LiteralError, LiteralTag, Precision};
pub use load::{load_kb, write_tsv, BuildError, KbBuilder, KbError, KbFormat, Object};
pub use store::{
    ClassId, ComparableStats, EntityId, Indexes, KnowledgeBase, LiteralId, Node, RelationId, RelationMeta, Triple,
    INVERSE_SUFFIX, TYPE_PREDICATE,
};
