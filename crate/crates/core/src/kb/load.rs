//! Ingestion of triple files and incremental index construction.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::literal::{Literal, LiteralError, LiteralTag};
use super::store::{
    ClassId, EntityId, KnowledgeBase, LiteralId, Node, RelationId, RelationMeta, Triple, INVERSE_SUFFIX,
    TYPE_PREDICATE,
};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Load { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KbFormat {
    TriplesTsv,
    NTriplesSubset,
}

impl FromStr for KbFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triples-tsv" | "tsv" => Ok(KbFormat::TriplesTsv),
            "n-triples-subset" | "nt" => Ok(KbFormat::NTriplesSubset),
            other => Err(format!("unknown KB format `{other}`")),
        }
    }
}

/// Object position of an input record.
#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Entity(String),
    Literal(Literal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObjectKind {
    Entity,
    Literal,
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("predicate `{0}` carries the reserved inverse suffix")]
    InversePredicate(String),
    #[error("class assertion object must be a class name")]
    LiteralClass,
    #[error("relation `{0}` mixes entity and literal objects")]
    MixedObjectKinds(String),
    #[error("empty identifier")]
    EmptyName,
}

/// Builds a [`KnowledgeBase`], keeping every index current after each insert.
#[derive(Debug, Default)]
pub struct KbBuilder {
    kb: KnowledgeBase,
    kinds: Vec<Option<ObjectKind>>,
}

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> Result<EntityId, BuildError> {
        if name.is_empty() {
            return Err(BuildError::EmptyName);
        }
        let id = EntityId(self.kb.entities.intern(name));
        if self.kb.class_of.len() <= id.index() {
            self.kb.class_of.resize_with(id.index() + 1, BTreeSet::new);
        }
        Ok(id)
    }

    fn literal(&mut self, lit: Literal) -> LiteralId {
        if let Some(&id) = self.kb.literal_ids.get(&lit) {
            return id;
        }
        let id = LiteralId(self.kb.literals.len() as u32);
        self.kb.literals.push(lit.clone());
        self.kb.literal_ids.insert(lit, id);
        id
    }

    fn relation(&mut self, name: &str) -> Result<RelationId, BuildError> {
        if name.is_empty() {
            return Err(BuildError::EmptyName);
        }
        if name.ends_with(INVERSE_SUFFIX) {
            return Err(BuildError::InversePredicate(name.to_string()));
        }
        let base = self.kb.relations.intern(name);
        if self.kb.meta.len() <= base as usize {
            self.kb.meta.resize_with(base as usize + 1, RelationMeta::default);
            self.kinds.resize(base as usize + 1, None);
        }
        Ok(RelationId { base, inverse: false })
    }

    /// Adds a class assertion `(entity, class)`.
    pub fn add_class(&mut self, entity: &str, class: &str) -> Result<(), BuildError> {
        if class.is_empty() {
            return Err(BuildError::EmptyName);
        }
        let e = self.entity(entity)?;
        let c = ClassId(self.kb.classes.intern(class));
        if self.kb.members.len() <= c.index() {
            self.kb.members.resize_with(c.index() + 1, BTreeSet::new);
        }
        self.kb.class_of[e.index()].insert(c);
        self.kb.members[c.index()].insert(e);
        Ok(())
    }

    /// Adds one record; the reserved type predicate routes to K_c. Returns
    /// whether the record was new.
    pub fn add(&mut self, subject: &str, predicate: &str, object: Object) -> Result<bool, BuildError> {
        if predicate == TYPE_PREDICATE {
            return match object {
                Object::Entity(class) => {
                    self.add_class(subject, &class)?;
                    Ok(true)
                }
                Object::Literal(_) => Err(BuildError::LiteralClass),
            };
        }
        let s = self.entity(subject)?;
        let p = self.relation(predicate)?;
        let kind = match object {
            Object::Entity(_) => ObjectKind::Entity,
            Object::Literal(_) => ObjectKind::Literal,
        };
        match self.kinds[p.base_index()] {
            Some(k) if k != kind => return Err(BuildError::MixedObjectKinds(predicate.to_string())),
            _ => self.kinds[p.base_index()] = Some(kind),
        }
        let (o, lit) = match object {
            Object::Entity(name) => (Node::Entity(self.entity(&name)?), None),
            Object::Literal(l) => (Node::Literal(self.literal(l.clone())), Some(l)),
        };
        let t = Triple { subject: s, predicate: p, object: o };
        if !self.kb.triples.insert(t) {
            return Ok(false);
        }
        let (ne, nr) = (self.kb.entities.len(), self.kb.relations.len());
        self.kb.indexes.insert(&t, ne, nr);
        let meta = &mut self.kb.meta[p.base_index()];
        meta.triples += 1;
        match lit {
            None => meta.entity_objects += 1,
            Some(l) => {
                match l.tag() {
                    LiteralTag::Numeric => {
                        meta.numeric_objects += 1;
                        meta.numeric.observe(&l);
                    }
                    LiteralTag::Datetime => {
                        meta.datetime_objects += 1;
                        meta.datetime.observe(&l);
                    }
                    LiteralTag::String => meta.string_objects += 1,
                }
                let tags = [meta.numeric_objects, meta.datetime_objects, meta.string_objects];
                if tags.iter().filter(|&&n| n > 0).count() > 1 && !meta.mixed_literal_tags {
                    meta.mixed_literal_tags = true;
                    log::warn!("relation `{predicate}` mixes literal tags; comparisons use matching tags only");
                }
            }
        }
        Ok(true)
    }

    pub fn build(mut self) -> KnowledgeBase {
        let (ne, nr) = (self.kb.entities.len(), self.kb.relations.len());
        self.kb.class_of.resize_with(ne, BTreeSet::new);
        self.kb.indexes.by_subject.resize_with(ne, Default::default);
        self.kb.indexes.by_predicate.resize_with(nr, Default::default);
        self.kb
    }
}

fn unescape_tsv(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape_tsv(field: &str) -> String {
    field.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn parse_tsv_object(field: &str) -> Result<Object, LiteralError> {
    for tag in [LiteralTag::Numeric, LiteralTag::Datetime, LiteralTag::String] {
        let suffix = format!("^{}", tag.as_str());
        if let Some(value) = field.strip_suffix(suffix.as_str()) {
            return Ok(Object::Literal(Literal::parse_tagged(&unescape_tsv(value), tag)?));
        }
    }
    Ok(Object::Entity(unescape_tsv(field)))
}

fn parse_tsv_line(line: &str) -> Result<(String, String, Object), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let object = parse_tsv_object(fields[2]).map_err(|e| e.to_string())?;
    Ok((unescape_tsv(fields[0]), unescape_tsv(fields[1]), object))
}

fn parse_iri(s: &str) -> Result<(&str, &str), String> {
    let s = s.trim_start();
    let body = s.strip_prefix('<').ok_or("expected `<`")?;
    let end = body.find('>').ok_or("unterminated `<...>`")?;
    Ok((&body[..end], &body[end + 1..]))
}

fn parse_nt_line(line: &str) -> Result<(String, String, Object), String> {
    let (s, rest) = parse_iri(line)?;
    let (p, rest) = parse_iri(rest)?;
    let rest = rest.trim();
    let rest = rest.strip_suffix('.').ok_or("missing terminating `.`")?.trim_end();
    let object = if rest.starts_with('<') {
        let (o, tail) = parse_iri(rest)?;
        if !tail.trim().is_empty() {
            return Err("trailing content after object".into());
        }
        Object::Entity(o.to_string())
    } else if let Some(body) = rest.strip_prefix('"') {
        let mut value = String::new();
        let mut chars = body.char_indices();
        let mut close = None;
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, 'n')) => value.push('\n'),
                    Some((_, 't')) => value.push('\t'),
                    Some((_, other)) => value.push(other),
                    None => return Err("dangling escape".into()),
                },
                '"' => {
                    close = Some(i);
                    break;
                }
                c => value.push(c),
            }
        }
        let close = close.ok_or("unterminated literal")?;
        let tail = &body[close + 1..];
        let tag = match tail.strip_prefix("^^") {
            Some(t) => t.trim().trim_start_matches('<').trim_end_matches('>'),
            None if tail.trim().is_empty() => "string",
            None => return Err("expected `^^tag` after literal".into()),
        };
        let tag = LiteralTag::from_str(tag).map_err(|e| e.to_string())?;
        Object::Literal(Literal::parse_tagged(&value, tag).map_err(|e| e.to_string())?)
    } else {
        return Err("object must be `<iri>` or a typed literal".into());
    };
    Ok((s.to_string(), p.to_string(), object))
}

/// Loads a knowledge base. Blank lines and lines starting with `#` are skipped.
pub fn load_kb<R: BufRead>(mut reader: R, format: KbFormat) -> Result<KnowledgeBase, KbError> {
    let mut builder = KbBuilder::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let err = |message: String| KbError::Load { line: line_no, message };
        let text = std::str::from_utf8(&buf).map_err(|e| err(format!("invalid UTF-8: {e}")))?;
        let text = text.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() || text.starts_with('#') {
            continue;
        }
        let (s, p, o) = match format {
            KbFormat::TriplesTsv => parse_tsv_line(text),
            KbFormat::NTriplesSubset => parse_nt_line(text),
        }
        .map_err(err)?;
        builder.add(&s, &p, o).map_err(|e| err(e.to_string()))?;
    }
    Ok(builder.build())
}

/// Writes the knowledge base in the triples-tsv format, class assertions last.
pub fn write_tsv<W: Write>(kb: &KnowledgeBase, mut out: W) -> std::io::Result<()> {
    for t in kb.triples() {
        let object = match t.object {
            Node::Entity(e) => escape_tsv(kb.entity_name(e)),
            Node::Literal(l) => {
                let lit = kb.literal(l);
                format!("{}^{}", escape_tsv(&lit.value_text()), lit.tag())
            }
        };
        writeln!(
            out,
            "{}\t{}\t{}",
            escape_tsv(kb.entity_name(t.subject)),
            escape_tsv(&kb.relation_name(t.predicate)),
            object
        )?;
    }
    for e in kb.entities() {
        for &c in kb.classes_of_entity(e) {
            writeln!(out, "{}\t{}\t{}", escape_tsv(kb.entity_name(e)), TYPE_PREDICATE, escape_tsv(kb.class_name(c)))?;
        }
    }
    Ok(())
}
