use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::kb::{ClassId, KnowledgeBase, RelationId};
use crate::sexpr::{Function, Program};

/// Number of tokens with a dedicated learned vector: `(`, `)`, EOS and the
/// function names.
pub const SPECIAL_COUNT: usize = 3 + Function::ALL.len();

pub const EOS_TEXT: &str = "<EOS>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VocabItem {
    Open,
    Close,
    Eos,
    Function(Function),
    Relation(String),
    Class(String),
}

impl fmt::Display for VocabItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabItem::Open => f.write_str("("),
            VocabItem::Close => f.write_str(")"),
            VocabItem::Eos => f.write_str(EOS_TEXT),
            VocabItem::Function(func) => write!(f, "{func}"),
            VocabItem::Relation(s) | VocabItem::Class(s) => f.write_str(s),
        }
    }
}

/// The closed token vocabulary: syntax, function names and schema items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    relations: BTreeSet<String>,
    classes: BTreeSet<String>,
}

/// Vocabulary restricted to ids of one knowledge base, for fast membership
/// tests during decoding.
#[derive(Debug, Clone, Default)]
pub struct SchemaFilter {
    relations: HashSet<RelationId>,
    classes: HashSet<ClassId>,
}

impl SchemaFilter {
    pub fn relation(&self, r: RelationId) -> bool {
        self.relations.contains(&r)
    }

    pub fn class(&self, c: ClassId) -> bool {
        self.classes.contains(&c)
    }
}

impl Vocabulary {
    /// Syntax and functions only.
    pub fn syntax_only() -> Self {
        Vocabulary { relations: BTreeSet::new(), classes: BTreeSet::new() }
    }

    /// Every relation (both directions) and class of the knowledge base.
    pub fn kb_wide(kb: &KnowledgeBase) -> Self {
        let mut relations = BTreeSet::new();
        for r in kb.relations() {
            relations.insert(kb.relation_name(r));
            relations.insert(kb.relation_name(r.inverted()));
        }
        let classes = kb.classes().map(|c| kb.class_name(c).to_string()).collect();
        Vocabulary { relations, classes }
    }

    /// Schema items that occur in the given programs.
    pub fn from_programs<'a>(programs: impl IntoIterator<Item = &'a Program>) -> Self {
        let mut v = Vocabulary::syntax_only();
        for p in programs {
            for item in p.schema_items() {
                match item {
                    Program::Relation(r) => v.relations.insert(r.clone()),
                    Program::Class(c) => v.classes.insert(c.clone()),
                    _ => unreachable!("schema_items yields relations and classes"),
                };
            }
        }
        v
    }

    pub fn items(&self) -> Vec<VocabItem> {
        let mut out = vec![VocabItem::Open, VocabItem::Close, VocabItem::Eos];
        out.extend(Function::ALL.into_iter().map(VocabItem::Function));
        out.extend(self.relations.iter().cloned().map(VocabItem::Relation));
        out.extend(self.classes.iter().cloned().map(VocabItem::Class));
        out
    }

    pub fn len(&self) -> usize {
        SPECIAL_COUNT + self.relations.len() + self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(String::as_str)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(String::as_str)
    }

    pub fn contains_relation(&self, name: &str) -> bool {
        self.relations.contains(name)
    }

    pub fn contains_class(&self, name: &str) -> bool {
        self.classes.contains(name)
    }

    /// Resolves the schema items against `kb`; items unknown to it are dropped.
    pub fn schema_filter(&self, kb: &KnowledgeBase) -> SchemaFilter {
        SchemaFilter {
            relations: self.relations.iter().filter_map(|r| kb.relation_id(r)).collect(),
            classes: self.classes.iter().filter_map(|c| kb.class_id(c)).collect(),
        }
    }
}
