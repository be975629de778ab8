use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::literal::{Comparator, Literal, LiteralError, LiteralTag};

/// Predicate used in input files for class assertions.
pub const TYPE_PREDICATE: &str = "type.object.type";
/// Suffix naming the inverse traversal of a relation.
pub const INVERSE_SUFFIX: &str = "_inv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EntityId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ClassId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LiteralId(pub(crate) u32);

/// A relation together with its traversal direction. Stored triples always
/// use the forward direction; the inverse is a query-time view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RelationId {
    pub(crate) base: u32,
    pub(crate) inverse: bool,
}

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn forward(self) -> RelationId {
        RelationId { base: self.base, inverse: false }
    }

    pub fn inverted(self) -> RelationId {
        RelationId { base: self.base, inverse: !self.inverse }
    }

    pub fn is_inverse(self) -> bool {
        self.inverse
    }

    pub fn base_index(self) -> usize {
        self.base as usize
    }
}

/// A graph node that can appear in object position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Node {
    Entity(EntityId),
    Literal(LiteralId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    /// Always a forward relation.
    pub predicate: RelationId,
    pub object: Node,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Interner {
    names: Vec<Box<str>>,
    ids: HashMap<Box<str>, u32>,
}

impl Interner {
    pub(crate) fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.into());
        self.ids.insert(name.into(), id);
        id
    }

    pub(crate) fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub(crate) fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.names.len()
    }
}

/// Aggregate ranges of the comparable literal objects of one relation, used
/// to answer comparative queries without a scan.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComparableStats {
    pub count: usize,
    /// Smallest / largest interval start over the objects.
    pub min_lo: Option<Literal>,
    pub max_lo: Option<Literal>,
    /// Smallest / largest interval end over the objects.
    pub min_hi: Option<Literal>,
    pub max_hi: Option<Literal>,
}

/// Per-relation bookkeeping on what the object column holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RelationMeta {
    pub triples: usize,
    pub entity_objects: usize,
    pub numeric_objects: usize,
    pub datetime_objects: usize,
    pub string_objects: usize,
    /// Set when literal objects of more than one tag occur under the relation.
    pub mixed_literal_tags: bool,
    pub numeric: ComparableStats,
    pub datetime: ComparableStats,
}

impl RelationMeta {
    pub fn is_literal_valued(&self) -> bool {
        self.numeric_objects + self.datetime_objects + self.string_objects > 0
    }

    /// The literal tag, when the relation is literal-valued with a single tag.
    pub fn literal_tag(&self) -> Option<LiteralTag> {
        if self.mixed_literal_tags {
            return None;
        }
        if self.numeric_objects > 0 {
            Some(LiteralTag::Numeric)
        } else if self.datetime_objects > 0 {
            Some(LiteralTag::Datetime)
        } else if self.string_objects > 0 {
            Some(LiteralTag::String)
        } else {
            None
        }
    }

    /// The comparable tag superlatives operate on: the more frequent of
    /// numeric and datetime, numeric on ties.
    pub fn comparable_tag(&self) -> Option<LiteralTag> {
        match (self.numeric_objects, self.datetime_objects) {
            (0, 0) => None,
            (n, d) if n >= d => Some(LiteralTag::Numeric),
            _ => Some(LiteralTag::Datetime),
        }
    }

    fn stats(&self, tag: LiteralTag) -> Option<&ComparableStats> {
        match tag {
            LiteralTag::Numeric => Some(&self.numeric),
            LiteralTag::Datetime => Some(&self.datetime),
            LiteralTag::String => None,
        }
    }
}

fn interval_bounds(lit: &Literal) -> (Literal, Literal) {
    match lit {
        Literal::Datetime(d) => {
            let (lo, hi) = d.interval();
            let mk = |(y, m, dd, s): (i32, u8, u8, u32)| {
                Literal::Datetime(
                    super::literal::Datetime::date_time(y, m, dd, s / 3600, (s / 60) % 60, s % 60)
                        .expect("interval bounds are valid instants"),
                )
            };
            (mk(lo), mk(hi))
        }
        other => (other.clone(), other.clone()),
    }
}

impl ComparableStats {
    pub(crate) fn observe(&mut self, lit: &Literal) {
        self.count += 1;
        let (lo, hi) = interval_bounds(lit);
        let upd = |slot: &mut Option<Literal>, v: &Literal, keep_min: bool| {
            let replace = match slot {
                None => true,
                Some(cur) => {
                    let ord = v.cmp(cur);
                    if keep_min {
                        ord.is_lt()
                    } else {
                        ord.is_gt()
                    }
                }
            };
            if replace {
                *slot = Some(v.clone());
            }
        };
        upd(&mut self.min_lo, &lo, true);
        upd(&mut self.max_lo, &lo, false);
        upd(&mut self.min_hi, &hi, true);
        upd(&mut self.max_hi, &hi, false);
    }

    /// Whether some object `t` satisfies `t op value`.
    fn any_satisfies(&self, op: Comparator, value: &Literal) -> Result<bool, LiteralError> {
        if self.count == 0 {
            return Ok(false);
        }
        let (vlo, vhi) = interval_bounds(value);
        // t < v  iff t.hi < v.lo ; t > v iff t.lo > v.hi
        // t <= v iff t.lo <= v.hi ; t >= v iff t.hi >= v.lo
        let (probe, against, probe_op) = match op {
            Comparator::Lt => (&self.min_hi, &vlo, Comparator::Lt),
            Comparator::Gt => (&self.max_lo, &vhi, Comparator::Gt),
            Comparator::Le => (&self.min_lo, &vhi, Comparator::Le),
            Comparator::Ge => (&self.max_hi, &vlo, Comparator::Ge),
        };
        let probe = probe.as_ref().expect("stats are populated when count > 0");
        probe.compare(probe_op, against)
    }
}

/// The three lookup structures over K_r. Maintained incrementally during
/// loading; [`Indexes::from_triples`] rebuilds them from scratch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Indexes {
    /// subject -> predicate -> objects
    pub(crate) by_subject: Vec<BTreeMap<u32, BTreeSet<Node>>>,
    /// object -> predicate -> subjects
    pub(crate) by_object: BTreeMap<Node, BTreeMap<u32, BTreeSet<EntityId>>>,
    /// predicate -> (subject, object)
    pub(crate) by_predicate: Vec<BTreeSet<(EntityId, Node)>>,
}

impl Indexes {
    fn ensure(&mut self, entities: usize, relations: usize) {
        if self.by_subject.len() < entities {
            self.by_subject.resize_with(entities, BTreeMap::new);
        }
        if self.by_predicate.len() < relations {
            self.by_predicate.resize_with(relations, BTreeSet::new);
        }
    }

    pub(crate) fn insert(&mut self, t: &Triple, entities: usize, relations: usize) {
        self.ensure(entities, relations);
        let p = t.predicate.base;
        self.by_subject[t.subject.index()].entry(p).or_default().insert(t.object);
        self.by_object.entry(t.object).or_default().entry(p).or_default().insert(t.subject);
        self.by_predicate[p as usize].insert((t.subject, t.object));
    }

    pub fn from_triples<'a>(
        triples: impl IntoIterator<Item = &'a Triple>,
        entities: usize,
        relations: usize,
    ) -> Indexes {
        let mut idx = Indexes::default();
        idx.ensure(entities, relations);
        for t in triples {
            idx.insert(t, entities, relations);
        }
        idx
    }

    /// Every triple recorded in each of the three indexes, in canonical order.
    pub fn entries(&self) -> [Vec<Triple>; 3] {
        let mut s = Vec::new();
        for (subj, preds) in self.by_subject.iter().enumerate() {
            for (&p, objs) in preds {
                for &o in objs {
                    s.push(Triple {
                        subject: EntityId(subj as u32),
                        predicate: RelationId { base: p, inverse: false },
                        object: o,
                    });
                }
            }
        }
        let mut o = Vec::new();
        for (&obj, preds) in &self.by_object {
            for (&p, subs) in preds {
                for &subj in subs {
                    o.push(Triple { subject: subj, predicate: RelationId { base: p, inverse: false }, object: obj });
                }
            }
        }
        let mut p = Vec::new();
        for (pred, pairs) in self.by_predicate.iter().enumerate() {
            for &(subj, obj) in pairs {
                p.push(Triple {
                    subject: subj,
                    predicate: RelationId { base: pred as u32, inverse: false },
                    object: obj,
                });
            }
        }
        for v in [&mut s, &mut o, &mut p] {
            v.sort();
        }
        [s, o, p]
    }
}

/// An immutable, indexed knowledge base: relational triples K_r over
/// entities and literals, plus class assertions K_c.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    pub(crate) entities: Interner,
    pub(crate) relations: Interner,
    pub(crate) classes: Interner,
    pub(crate) literals: Vec<Literal>,
    pub(crate) literal_ids: HashMap<Literal, LiteralId>,
    pub(crate) triples: BTreeSet<Triple>,
    pub(crate) class_of: Vec<BTreeSet<ClassId>>,
    pub(crate) members: Vec<BTreeSet<EntityId>>,
    pub(crate) indexes: Indexes,
    pub(crate) meta: Vec<RelationMeta>,
}

static EMPTY_NODES: BTreeSet<Node> = BTreeSet::new();
static EMPTY_ENTITIES: BTreeSet<EntityId> = BTreeSet::new();
static EMPTY_CLASSES: BTreeSet<ClassId> = BTreeSet::new();

impl KnowledgeBase {
    // ---- symbols ----

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.get(name).map(ClassId)
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        self.classes.name(id.0)
    }

    /// Resolves a relation name, reading a trailing `_inv` as the inverse
    /// view unless the full name is itself a stored relation.
    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        if let Some(base) = self.relations.get(name) {
            return Some(RelationId { base, inverse: false });
        }
        let stem = name.strip_suffix(INVERSE_SUFFIX)?;
        self.relations.get(stem).map(|base| RelationId { base, inverse: true })
    }

    pub fn relation_name(&self, id: RelationId) -> String {
        let base = self.relations.name(id.base);
        if id.inverse {
            format!("{base}{INVERSE_SUFFIX}")
        } else {
            base.to_string()
        }
    }

    pub fn literal_id(&self, lit: &Literal) -> Option<LiteralId> {
        self.literal_ids.get(lit).copied()
    }

    pub fn literal(&self, id: LiteralId) -> &Literal {
        &self.literals[id.0 as usize]
    }

    pub fn node_name(&self, node: Node) -> String {
        match node {
            Node::Entity(e) => self.entity_name(e).to_string(),
            Node::Literal(l) => self.literal(l).to_string(),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.classes.len() as u32).map(ClassId)
    }

    /// Forward relations in interning order.
    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relations.len() as u32).map(|base| RelationId { base, inverse: false })
    }

    pub fn literal_ids(&self) -> impl Iterator<Item = LiteralId> + '_ {
        (0..self.literals.len() as u32).map(LiteralId)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn class_assertion_count(&self) -> usize {
        self.class_of.iter().map(BTreeSet::len).sum()
    }

    pub fn relation_meta(&self, rel: RelationId) -> &RelationMeta {
        &self.meta[rel.base as usize]
    }

    pub fn indexes(&self) -> &Indexes {
        &self.indexes
    }

    pub fn rebuild_indexes(&self) -> Indexes {
        Indexes::from_triples(&self.triples, self.entities.len(), self.relations.len())
    }

    // ---- primitive lookups ----

    /// Objects `t` with `(subject, rel, t)`, forward relations only.
    pub fn objects(&self, subject: EntityId, rel: RelationId) -> &BTreeSet<Node> {
        debug_assert!(!rel.inverse);
        self.indexes
            .by_subject
            .get(subject.index())
            .and_then(|m| m.get(&rel.base))
            .unwrap_or(&EMPTY_NODES)
    }

    /// Subjects `h` with `(h, rel, object)`, forward relations only.
    pub fn subjects(&self, object: Node, rel: RelationId) -> &BTreeSet<EntityId> {
        debug_assert!(!rel.inverse);
        self.indexes
            .by_object
            .get(&object)
            .and_then(|m| m.get(&rel.base))
            .unwrap_or(&EMPTY_ENTITIES)
    }

    /// Whether `(head, rel, tail)` holds under the inverse view.
    pub fn has_edge(&self, head: Node, rel: RelationId, tail: Node) -> bool {
        let (s, o) = if rel.inverse { (tail, head) } else { (head, tail) };
        match s {
            Node::Entity(s) => self.objects(s, rel.forward()).contains(&o),
            Node::Literal(_) => false,
        }
    }

    /// Nodes `t` with `(head, rel, t)` under the inverse view.
    pub fn neighbors(&self, head: Node, rel: RelationId) -> Vec<Node> {
        if rel.inverse {
            self.subjects(head, rel.forward()).iter().map(|&e| Node::Entity(e)).collect()
        } else {
            match head {
                Node::Entity(e) => self.objects(e, rel).iter().copied().collect(),
                Node::Literal(_) => Vec::new(),
            }
        }
    }

    pub fn classes_of_entity(&self, e: EntityId) -> &BTreeSet<ClassId> {
        self.class_of.get(e.index()).unwrap_or(&EMPTY_CLASSES)
    }

    pub fn class_members(&self, c: ClassId) -> &BTreeSet<EntityId> {
        self.members.get(c.index()).unwrap_or(&EMPTY_ENTITIES)
    }

    // ---- admissible-action queries ----

    /// Every relation traversable from some head, in either direction.
    pub fn outgoing_relations(&self, heads: &[Node]) -> BTreeSet<RelationId> {
        let mut out = BTreeSet::new();
        for &h in heads {
            if let Node::Entity(e) = h {
                if let Some(preds) = self.indexes.by_subject.get(e.index()) {
                    out.extend(preds.keys().map(|&base| RelationId { base, inverse: false }));
                }
            }
            if let Some(preds) = self.indexes.by_object.get(&h) {
                out.extend(preds.keys().map(|&base| RelationId { base, inverse: true }));
            }
        }
        out
    }

    /// All nodes connected to any head via `rel` (forward: objects; inverse:
    /// subjects whose object is a head).
    pub fn join_neighbors(&self, heads: &[Node], rel: RelationId) -> BTreeSet<Node> {
        let mut out = BTreeSet::new();
        for &h in heads {
            if rel.inverse {
                out.extend(self.subjects(h, rel.forward()).iter().map(|&e| Node::Entity(e)));
            } else if let Node::Entity(e) = h {
                out.extend(self.objects(e, rel).iter().copied());
            }
        }
        out
    }

    pub fn classes_of(&self, entities: &[EntityId]) -> BTreeSet<ClassId> {
        entities.iter().flat_map(|&e| self.classes_of_entity(e).iter().copied()).collect()
    }

    /// Forward relations from the heads whose objects include a literal of
    /// the relation's comparable tag.
    pub fn numeric_relations(&self, heads: &[EntityId]) -> BTreeSet<RelationId> {
        let mut out = BTreeSet::new();
        for &h in heads {
            let Some(preds) = self.indexes.by_subject.get(h.index()) else { continue };
            for (&base, objs) in preds {
                let Some(tag) = self.meta[base as usize].comparable_tag() else { continue };
                let hit = objs.iter().any(|o| matches!(o, Node::Literal(l) if self.literal(*l).tag() == tag));
                if hit {
                    out.insert(RelationId { base, inverse: false });
                }
            }
        }
        out
    }

    /// Relations having some literal object `t` of `value`'s tag with `t op value`.
    pub fn comparative_relations(&self, value: &Literal, op: Comparator) -> Result<BTreeSet<RelationId>, LiteralError> {
        if !value.tag().is_comparable() {
            return Err(LiteralError::StringComparison);
        }
        let mut out = BTreeSet::new();
        for (base, meta) in self.meta.iter().enumerate() {
            let stats = meta.stats(value.tag()).expect("comparable tag");
            if stats.any_satisfies(op, value)? {
                out.insert(RelationId { base: base as u32, inverse: false });
            }
        }
        Ok(out)
    }

    /// Subjects `h` with `(h, rel, t)` and `t op value`, skipping objects of
    /// other tags.
    pub fn compare_subjects(&self, rel: RelationId, value: &Literal, op: Comparator) -> Result<BTreeSet<EntityId>, LiteralError> {
        if !value.tag().is_comparable() {
            return Err(LiteralError::StringComparison);
        }
        let mut out = BTreeSet::new();
        if rel.inverse {
            return Ok(out);
        }
        for &(s, o) in &self.indexes.by_predicate[rel.base as usize] {
            if let Node::Literal(l) = o {
                let t = self.literal(l);
                if t.tag() == value.tag() && t.compare(op, value)? {
                    out.insert(s);
                }
            }
        }
        Ok(out)
    }

    /// Pairs `(r, t)` with `(h, r, t)` for some head, under the inverse view.
    /// With `temporal_only`, `t` is restricted to datetime literals.
    pub fn constraint_pairs(&self, heads: &[EntityId], temporal_only: bool) -> BTreeSet<(RelationId, Node)> {
        let mut out = BTreeSet::new();
        for &h in heads {
            if let Some(preds) = self.indexes.by_subject.get(h.index()) {
                for (&base, objs) in preds {
                    for &o in objs {
                        if !temporal_only || self.is_datetime(o) {
                            out.insert((RelationId { base, inverse: false }, o));
                        }
                    }
                }
            }
            if temporal_only {
                continue;
            }
            if let Some(preds) = self.indexes.by_object.get(&Node::Entity(h)) {
                for (&base, subs) in preds {
                    out.extend(subs.iter().map(|&s| (RelationId { base, inverse: true }, Node::Entity(s))));
                }
            }
        }
        out
    }

    /// The relations of [`constraint_pairs`](Self::constraint_pairs).
    pub fn constraint_relations(&self, heads: &[EntityId], temporal_only: bool) -> BTreeSet<RelationId> {
        let mut out = BTreeSet::new();
        for &h in heads {
            if let Some(preds) = self.indexes.by_subject.get(h.index()) {
                for (&base, objs) in preds {
                    if !temporal_only || objs.iter().any(|&o| self.is_datetime(o)) {
                        out.insert(RelationId { base, inverse: false });
                    }
                }
            }
            if !temporal_only {
                if let Some(preds) = self.indexes.by_object.get(&Node::Entity(h)) {
                    out.extend(preds.keys().map(|&base| RelationId { base, inverse: true }));
                }
            }
        }
        out
    }

    /// The constants `t` of [`constraint_pairs`](Self::constraint_pairs) for one relation.
    pub fn constraint_constants(&self, heads: &[EntityId], rel: RelationId, temporal_only: bool) -> BTreeSet<Node> {
        let mut out = BTreeSet::new();
        for &h in heads {
            for t in self.neighbors(Node::Entity(h), rel) {
                if !temporal_only || self.is_datetime(t) {
                    out.insert(t);
                }
            }
        }
        out
    }

    pub fn is_datetime(&self, node: Node) -> bool {
        matches!(node, Node::Literal(l) if self.literal(l).tag() == LiteralTag::Datetime)
    }
}
