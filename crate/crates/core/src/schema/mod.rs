//! Relational data model: entity types, entities, binary relations and the
//! observed tuple store.

mod io;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub use self::io::{
    load_database_dir, parse_manifest, read_census, read_tuple_stream, write_census,
    write_database_dir, write_labeled_cells, write_manifest, write_tuple_stream, CENSUS_FILE, MANIFEST_FILE,
};

pub type TypeId = usize;
pub type RelId = usize;

/// An entity, addressed by its type and its dense per-type ordinal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityRef {
    pub ty: TypeId,
    pub ordinal: u32,
}

/// How unrecorded cells of a relation are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Observation {
    /// Both labels are recorded; unrecorded cells are unknown.
    #[default]
    Explicit,
    /// Every unrecorded cell is a negative.
    FullyObserved,
    /// Only positives are recorded; negatives must be sampled.
    PositivesOnly,
}

impl Observation {
    pub fn keyword(self) -> &'static str {
        match self {
            Observation::Explicit => "explicit",
            Observation::FullyObserved => "fully_observed",
            Observation::PositivesOnly => "positives_only",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "explicit" => Some(Observation::Explicit),
            "fully_observed" => Some(Observation::FullyObserved),
            "positives_only" => Some(Observation::PositivesOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub row_type: TypeId,
    pub col_type: TypeId,
    pub observation: Observation,
}

impl Relation {
    pub fn fully_observed(&self) -> bool {
        self.observation == Observation::FullyObserved
    }

    pub fn positives_only(&self) -> bool {
        self.observation == Observation::PositivesOnly
    }
}

/// Declarations read from a schema manifest.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaManifest {
    pub types: Vec<String>,
    pub relations: Vec<RelationDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub row_type: String,
    pub col_type: String,
    pub observation: Observation,
}

impl SchemaManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_type(mut self, name: &str) -> Self {
        self.types.push(name.to_string());
        self
    }

    pub fn with_relation(
        mut self,
        name: &str,
        row_type: &str,
        col_type: &str,
        observation: Observation,
    ) -> Self {
        self.relations.push(RelationDecl {
            name: name.to_string(),
            row_type: row_type.to_string(),
            col_type: col_type.to_string(),
            observation,
        });
        self
    }
}

/// One line of a tuple stream, still carrying surface identifiers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleRecord {
    pub relation: String,
    pub e1: String,
    pub e2: String,
    pub label: u8,
}

impl TupleRecord {
    pub fn new(relation: &str, e1: &str, e2: &str, label: u8) -> Self {
        TupleRecord {
            relation: relation.to_string(),
            e1: e1.to_string(),
            e2: e2.to_string(),
            label,
        }
    }
}

/// A labeled cell addressed by ordinals; the unit of training, validation
/// and test sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledCell {
    pub relation: RelId,
    pub row: u32,
    pub col: u32,
    pub label: u8,
}

/// Entity types, entities and relation schemas.
///
/// A registry is immutable once a [`Database`] has been built from it and is
/// shared (via `Arc`) by every database derived from it and by the models
/// trained on them, so ordinals stay valid across splits.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    types: Vec<String>,
    type_index: HashMap<String, TypeId>,
    entities: Vec<Vec<String>>,
    entity_index: Vec<HashMap<String, u32>>,
    relations: Vec<Relation>,
    relation_index: HashMap<String, RelId>,
}

impl Registry {
    pub fn from_manifest(manifest: &SchemaManifest) -> Result<Self> {
        let mut reg = Registry::default();
        for name in &manifest.types {
            reg.add_type(name)?;
        }
        for decl in &manifest.relations {
            reg.add_relation(decl)?;
        }
        Ok(reg)
    }

    pub(crate) fn add_type(&mut self, name: &str) -> Result<TypeId> {
        if name.is_empty() || name.contains(|c: char| c == ':' || c.is_whitespace()) {
            return Err(Error::Schema(format!("invalid type name `{name}`")));
        }
        if self.type_index.contains_key(name) {
            return Err(Error::Schema(format!("duplicate type `{name}`")));
        }
        let id = self.types.len();
        self.types.push(name.to_string());
        self.type_index.insert(name.to_string(), id);
        self.entities.push(Vec::new());
        self.entity_index.push(HashMap::new());
        Ok(id)
    }

    pub(crate) fn add_relation(&mut self, decl: &RelationDecl) -> Result<RelId> {
        if decl.name.is_empty() || decl.name.contains(char::is_whitespace) {
            return Err(Error::Schema(format!("invalid relation name `{}`", decl.name)));
        }
        if self.relation_index.contains_key(&decl.name) {
            return Err(Error::Schema(format!("duplicate relation `{}`", decl.name)));
        }
        let row_type = self.type_id(&decl.row_type)?;
        let col_type = self.type_id(&decl.col_type)?;
        let id = self.relations.len();
        self.relations.push(Relation {
            name: decl.name.clone(),
            row_type,
            col_type,
            observation: decl.observation,
        });
        self.relation_index.insert(decl.name.clone(), id);
        Ok(id)
    }

    /// Registers `id` under type `ty`, returning the existing ordinal if the
    /// entity is already known.
    pub(crate) fn intern(&mut self, ty: TypeId, id: &str) -> Result<EntityRef> {
        if id.is_empty() {
            return Err(Error::Schema("empty entity id".into()));
        }
        if let Some(&ordinal) = self.entity_index[ty].get(id) {
            return Ok(EntityRef { ty, ordinal });
        }
        let ordinal = u32::try_from(self.entities[ty].len())
            .map_err(|_| Error::Schema("too many entities".into()))?;
        self.entities[ty].push(id.to_string());
        self.entity_index[ty].insert(id.to_string(), ordinal);
        Ok(EntityRef { ty, ordinal })
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn type_names(&self) -> &[String] {
        &self.types
    }

    pub fn type_name(&self, ty: TypeId) -> &str {
        &self.types[ty]
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId> {
        self.type_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn entity_count(&self, ty: TypeId) -> usize {
        self.entities[ty].len()
    }

    pub fn total_entities(&self) -> usize {
        self.entities.iter().map(Vec::len).sum()
    }

    pub fn entity_ids(&self, ty: TypeId) -> &[String] {
        &self.entities[ty]
    }

    pub fn entity(&self, ty: TypeId, id: &str) -> Option<EntityRef> {
        self.entity_index[ty]
            .get(id)
            .map(|&ordinal| EntityRef { ty, ordinal })
    }

    pub fn entity_id(&self, e: EntityRef) -> &str {
        &self.entities[e.ty][e.ordinal as usize]
    }

    /// `type:id` rendering used by the model and projection formats.
    pub fn qualified_name(&self, e: EntityRef) -> String {
        format!("{}:{}", self.types[e.ty], self.entity_id(e))
    }

    /// Resolves a `type:id` string.
    pub fn resolve_qualified(&self, qualified: &str) -> Result<EntityRef> {
        let (ty, id) = qualified
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("expected type:id, got `{qualified}`")))?;
        let ty = self.type_id(ty)?;
        self.entity(ty, id)
            .ok_or_else(|| Error::UnknownEntity(qualified.to_string()))
    }

    /// All entities in type order, then ordinal order.
    pub fn all_entities(&self) -> impl Iterator<Item = EntityRef> + '_ {
        self.entities.iter().enumerate().flat_map(|(ty, ids)| {
            (0..ids.len() as u32).map(move |ordinal| EntityRef { ty, ordinal })
        })
    }

    /// Offset of each type's first entity in a flat, type-major layout.
    pub fn type_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.types.len());
        let mut acc = 0;
        for ids in &self.entities {
            offsets.push(acc);
            acc += ids.len();
        }
        offsets
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: RelId) -> &Relation {
        &self.relations[id]
    }

    pub fn relation_id(&self, name: &str) -> Result<RelId> {
        self.relation_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn manifest(&self) -> SchemaManifest {
        SchemaManifest {
            types: self.types.clone(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationDecl {
                    name: r.name.clone(),
                    row_type: self.types[r.row_type].clone(),
                    col_type: self.types[r.col_type].clone(),
                    observation: r.observation,
                })
                .collect(),
        }
    }

    /// Resolves a named tuple into a labeled cell without registering
    /// anything.
    pub fn resolve_record(&self, record: &TupleRecord) -> Result<LabeledCell> {
        let relation = self.relation_id(&record.relation)?;
        let rel = &self.relations[relation];
        let row = self
            .entity(rel.row_type, &record.e1)
            .ok_or_else(|| Error::UnknownEntity(format!("{}:{}", self.types[rel.row_type], record.e1)))?;
        let col = self
            .entity(rel.col_type, &record.e2)
            .ok_or_else(|| Error::UnknownEntity(format!("{}:{}", self.types[rel.col_type], record.e2)))?;
        Ok(LabeledCell {
            relation,
            row: row.ordinal,
            col: col.ordinal,
            label: record.label,
        })
    }

    pub fn cell_record(&self, cell: &LabeledCell) -> TupleRecord {
        let rel = &self.relations[cell.relation];
        TupleRecord {
            relation: rel.name.clone(),
            e1: self.entities[rel.row_type][cell.row as usize].clone(),
            e2: self.entities[rel.col_type][cell.col as usize].clone(),
            label: cell.label,
        }
    }
}

/// Observed cells of one relation, in first-seen order.
pub type TupleStore = IndexMap<(u32, u32), u8>;

/// The observed database: a registry plus one tuple store per relation.
#[derive(Clone, Debug)]
pub struct Database {
    registry: Arc<Registry>,
    tuples: Vec<TupleStore>,
}

/// Per-entity observed-tuple counts of one relation, indexed by ordinal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeStats {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Database {
    /// Assembles a database from an existing registry and per-relation
    /// stores. Used to derive split databases that keep every ordinal.
    pub fn from_parts(registry: Arc<Registry>, tuples: Vec<TupleStore>) -> Result<Self> {
        if tuples.len() != registry.relations().len() {
            return Err(Error::Schema(format!(
                "expected {} tuple stores, got {}",
                registry.relations().len(),
                tuples.len()
            )));
        }
        for (rel, store) in registry.relations().iter().zip(&tuples) {
            let rows = registry.entity_count(rel.row_type) as u32;
            let cols = registry.entity_count(rel.col_type) as u32;
            for (&(r, c), &label) in store {
                if r >= rows || c >= cols || label > 1 {
                    return Err(Error::Schema(format!("invalid cell in relation `{}`", rel.name)));
                }
                if rel.positives_only() && label != 1 {
                    return Err(Error::Schema(format!(
                        "negative label stored in positives-only relation `{}`",
                        rel.name
                    )));
                }
            }
        }
        Ok(Database { registry, tuples })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn shared_registry(&self) -> Arc<Registry> {
        Arc::clone(&self.registry)
    }

    pub fn relation_id(&self, name: &str) -> Result<RelId> {
        self.registry.relation_id(name)
    }

    pub fn tuples(&self, rel: RelId) -> &TupleStore {
        &self.tuples[rel]
    }

    pub fn tuple_count(&self, rel: RelId) -> usize {
        self.tuples[rel].len()
    }

    pub fn total_tuples(&self) -> usize {
        self.tuples.iter().map(IndexMap::len).sum()
    }

    pub fn positive_count(&self, rel: RelId) -> usize {
        self.tuples[rel].values().filter(|&&y| y == 1).count()
    }

    /// Observed tuples of `rel` as labeled cells.
    pub fn cells(&self, rel: RelId) -> impl Iterator<Item = LabeledCell> + '_ {
        self.tuples[rel]
            .iter()
            .map(move |(&(row, col), &label)| LabeledCell { relation: rel, row, col, label })
    }

    /// Stored label of a cell; unrecorded cells of a fully observed relation
    /// resolve to 0.
    pub fn lookup_cell(&self, rel: RelId, row: u32, col: u32) -> Option<u8> {
        match self.tuples[rel].get(&(row, col)) {
            Some(&y) => Some(y),
            None if self.registry.relation(rel).fully_observed() => Some(0),
            None => None,
        }
    }

    /// Label lookup by surface identifiers.
    pub fn lookup(&self, relation: &str, e1: &str, e2: &str) -> Result<Option<u8>> {
        let cell = self.registry.resolve_record(&TupleRecord::new(relation, e1, e2, 0))?;
        Ok(self.lookup_cell(cell.relation, cell.row, cell.col))
    }

    pub fn degree_stats(&self, relation: &str) -> Result<DegreeStats> {
        let rel_id = self.registry.relation_id(relation)?;
        let rel = self.registry.relation(rel_id);
        let mut rows = vec![0; self.registry.entity_count(rel.row_type)];
        let mut cols = vec![0; self.registry.entity_count(rel.col_type)];
        for &(r, c) in self.tuples[rel_id].keys() {
            rows[r as usize] += 1;
            cols[c as usize] += 1;
        }
        Ok(DegreeStats { rows, cols })
    }
}

/// Incrementally builds a [`Database`], registering entities on first
/// appearance.
#[derive(Debug)]
pub struct DatabaseBuilder {
    registry: Registry,
    tuples: Vec<TupleStore>,
}

impl DatabaseBuilder {
    pub fn new(manifest: &SchemaManifest) -> Result<Self> {
        let registry = Registry::from_manifest(manifest)?;
        let tuples = vec![TupleStore::new(); registry.relations().len()];
        Ok(DatabaseBuilder { registry, tuples })
    }

    /// Pre-registers an entity so its ordinal does not depend on tuple order.
    pub fn register_entity(&mut self, type_name: &str, id: &str) -> Result<EntityRef> {
        let ty = self.registry.type_id(type_name)?;
        self.registry.intern(ty, id)
    }

    pub fn add(&mut self, record: &TupleRecord) -> Result<()> {
        let rel_id = self.registry.relation_id(&record.relation)?;
        let rel = self.registry.relation(rel_id).clone();
        if record.label > 1 {
            return Err(Error::InvalidArgument(format!(
                "label must be 0 or 1, got {}",
                record.label
            )));
        }
        if rel.positives_only() && record.label != 1 {
            return Err(Error::PositivesOnlyViolation {
                relation: rel.name,
                e1: record.e1.clone(),
                e2: record.e2.clone(),
                label: record.label,
            });
        }
        let row = self.registry.intern(rel.row_type, &record.e1)?;
        let col = self.registry.intern(rel.col_type, &record.e2)?;
        let store = &mut self.tuples[rel_id];
        match store.get(&(row.ordinal, col.ordinal)) {
            Some(&existing) if existing != record.label => Err(Error::ConflictingTuple {
                relation: rel.name,
                e1: record.e1.clone(),
                e2: record.e2.clone(),
            }),
            Some(_) => Ok(()),
            None => {
                store.insert((row.ordinal, col.ordinal), record.label);
                Ok(())
            }
        }
    }

    pub fn build(self) -> Database {
        Database {
            registry: Arc::new(self.registry),
            tuples: self.tuples,
        }
    }
}

/// Builds and validates a database from a manifest and tuple streams.
pub fn build_database<I>(manifest: &SchemaManifest, tuples: I) -> Result<Database>
where
    I: IntoIterator<Item = TupleRecord>,
{
    let mut builder = DatabaseBuilder::new(manifest)?;
    for record in tuples {
        builder.add(&record)?;
    }
    Ok(builder.build())
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reg = &self.registry;
        for (ty, name) in reg.type_names().iter().enumerate() {
            writeln!(f, "type {name}: {} entities", reg.entity_count(ty))?;
        }
        for (id, rel) in reg.relations().iter().enumerate() {
            writeln!(
                f,
                "relation {} ({} x {}, {}): {} tuples, {} positive",
                rel.name,
                reg.type_name(rel.row_type),
                reg.type_name(rel.col_type),
                rel.observation.keyword(),
                self.tuple_count(id),
                self.positive_count(id)
            )?;
        }
        Ok(())
    }
}
