//! Model parameters and the logistic likelihood.
//!
//! Every entity owns one k-dimensional vector shared by all relations it
//! takes part in. The probability that `r(e1, e2)` holds is
//! `sigmoid(phi_e1 . phi_e2)`, optionally plus per-entity biases and a
//! per-relation offset.

mod io;

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::schema::{Database, EntityRef, LabeledCell, Registry, RelId};

pub use self::io::{load_model, load_model_file, save_model, save_model_file, Precision, MODEL_MAGIC};

/// Numerically stable logistic function.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(s)` without forming `sigmoid(s)` first.
pub fn log_sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        -(-s).exp().ln_1p()
    } else {
        s - s.exp().ln_1p()
    }
}

/// Log-probability of label `y` given the logit `s`.
pub fn log_prob(s: f64, y: u8) -> f64 {
    if y == 1 {
        log_sigmoid(s)
    } else {
        log_sigmoid(-s)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-entity biases and per-relation offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct Biases {
    pub entity: Vec<f64>,
    pub relation: Vec<f64>,
}

/// The learned parameters: one vector per registered entity, laid out
/// type-major in a single buffer.
#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    registry: Arc<Registry>,
    k: usize,
    type_offsets: Vec<usize>,
    vectors: Vec<f64>,
    biases: Option<Biases>,
}

impl EmbeddingStore {
    pub fn zeros(registry: Arc<Registry>, k: usize, enable_biases: bool) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let n = registry.total_entities();
        let biases = enable_biases.then(|| Biases {
            entity: vec![0.0; n],
            relation: vec![0.0; registry.relations().len()],
        });
        Ok(EmbeddingStore {
            type_offsets: registry.type_offsets(),
            vectors: vec![0.0; n * k],
            registry,
            k,
            biases,
        })
    }

    pub fn from_parts(
        registry: Arc<Registry>,
        k: usize,
        vectors: Vec<f64>,
        biases: Option<Biases>,
    ) -> Result<Self> {
        let mut store = EmbeddingStore::zeros(registry, k, false)?;
        if vectors.len() != store.vectors.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} vector coordinates, got {}",
                store.vectors.len(),
                vectors.len()
            )));
        }
        if let Some(b) = &biases {
            if b.entity.len() != store.registry.total_entities()
                || b.relation.len() != store.registry.relations().len()
            {
                return Err(Error::InvalidArgument("bias table sizes do not match registry".into()));
            }
        }
        store.vectors = vectors;
        store.biases = biases;
        if !store.all_finite() {
            return Err(Error::Divergence("non-finite parameter".into()));
        }
        Ok(store)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn shared_registry(&self) -> Arc<Registry> {
        Arc::clone(&self.registry)
    }

    pub fn biases_enabled(&self) -> bool {
        self.biases.is_some()
    }

    pub fn biases(&self) -> Option<&Biases> {
        self.biases.as_ref()
    }

    pub fn biases_mut(&mut self) -> Option<&mut Biases> {
        self.biases.as_mut()
    }

    /// Flat index of an entity.
    pub fn index(&self, e: EntityRef) -> usize {
        self.type_offsets[e.ty] + e.ordinal as usize
    }

    /// Flat indices of the two entities of a cell of `rel`.
    pub fn cell_indices(&self, rel: RelId, row: u32, col: u32) -> (usize, usize) {
        let r = self.registry.relation(rel);
        (
            self.type_offsets[r.row_type] + row as usize,
            self.type_offsets[r.col_type] + col as usize,
        )
    }

    pub fn vector(&self, e: EntityRef) -> &[f64] {
        self.vector_at(self.index(e))
    }

    pub fn vector_mut(&mut self, e: EntityRef) -> &mut [f64] {
        let i = self.index(e);
        &mut self.vectors[i * self.k..(i + 1) * self.k]
    }

    pub fn vector_at(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.k..(index + 1) * self.k]
    }

    pub fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub(crate) fn raw_vectors_mut(&mut self) -> &mut [f64] {
        &mut self.vectors
    }

    pub fn entity_bias(&self, e: EntityRef) -> f64 {
        self.biases.as_ref().map_or(0.0, |b| b.entity[self.index(e)])
    }

    pub fn relation_offset(&self, rel: RelId) -> f64 {
        self.biases.as_ref().map_or(0.0, |b| b.relation[rel])
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.vectors.len() + self.biases.as_ref().map_or(0, |b| b.entity.len() + b.relation.len())
    }

    /// Squared Euclidean norm of all entity vectors, plus entity biases when
    /// enabled. Relation offsets are not regularized.
    pub fn squared_norm(&self) -> f64 {
        let v: f64 = self.vectors.iter().map(|x| x * x).sum();
        v + self.biases.as_ref().map_or(0.0, |b| b.entity.iter().map(|x| x * x).sum())
    }

    pub fn all_finite(&self) -> bool {
        self.vectors.iter().all(|x| x.is_finite())
            && self.biases.as_ref().is_none_or(|b| {
                b.entity.iter().chain(&b.relation).all(|x| x.is_finite())
            })
    }

    /// Pre-sigmoid score of a cell.
    pub fn logit(&self, rel: RelId, row: u32, col: u32) -> f64 {
        let (i, j) = self.cell_indices(rel, row, col);
        let mut s = dot(self.vector_at(i), self.vector_at(j));
        if let Some(b) = &self.biases {
            s += b.entity[i] + b.entity[j] + b.relation[rel];
        }
        s
    }

    /// Probability that the cell holds.
    pub fn score(&self, rel: RelId, row: u32, col: u32) -> f64 {
        sigmoid(self.logit(rel, row, col))
    }

    pub fn score_cell(&self, cell: &LabeledCell) -> f64 {
        self.score(cell.relation, cell.row, cell.col)
    }

    /// Probability by surface identifiers; `e1` is read as the relation's
    /// row type and `e2` as its column type.
    pub fn score_named(&self, relation: &str, e1: &str, e2: &str) -> Result<f64> {
        let rel_id = self.registry.relation_id(relation)?;
        let rel = self.registry.relation(rel_id);
        let row = self.registry.entity(rel.row_type, e1).ok_or_else(|| {
            Error::UnknownEntity(format!("{}:{e1}", self.registry.type_name(rel.row_type)))
        })?;
        let col = self.registry.entity(rel.col_type, e2).ok_or_else(|| {
            Error::UnknownEntity(format!("{}:{e2}", self.registry.type_name(rel.col_type)))
        })?;
        Ok(self.score(rel_id, row.ordinal, col.ordinal))
    }

    /// Bitwise equality of every parameter and of the registry layout.
    pub fn bit_identical(&self, other: &EmbeddingStore) -> bool {
        fn bits(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        let reg_eq = self.registry.manifest() == other.registry.manifest()
            && self.registry.all_entities().eq(other.registry.all_entities())
            && self
                .registry
                .all_entities()
                .all(|e| self.registry.entity_id(e) == other.registry.entity_id(e));
        let bias_eq = match (&self.biases, &other.biases) {
            (None, None) => true,
            (Some(a), Some(b)) => bits(&a.entity, &b.entity) && bits(&a.relation, &b.relation),
            _ => false,
        };
        self.k == other.k && reg_eq && bits(&self.vectors, &other.vectors) && bias_eq
    }
}

/// Random initialization: every coordinate i.i.d. uniform on the open
/// interval (-scale, scale); biases and offsets start at zero.
pub fn init_embeddings(
    db: &Database,
    k: usize,
    seed: u64,
    scale: f64,
    enable_biases: bool,
) -> Result<EmbeddingStore> {
    init_for_registry(db.shared_registry(), k, seed, scale, enable_biases)
}

pub fn init_for_registry(
    registry: Arc<Registry>,
    k: usize,
    seed: u64,
    scale: f64,
    enable_biases: bool,
) -> Result<EmbeddingStore> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("init scale must be positive, got {scale}")));
    }
    let mut store = EmbeddingStore::zeros(registry, k, enable_biases)?;
    let mut rng = StreamRng::seed_from_u64(seed);
    for x in store.vectors.iter_mut() {
        *x = open_symmetric(&mut rng) * scale;
    }
    Ok(store)
}

/// Uniform draw on (-1, 1).
fn open_symmetric<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return 2.0 * u - 1.0;
        }
    }
}

/// Regularized log likelihood of the observed tuples of `relations` (plus
/// any supplied sampled cells), minus `lambda * ||Phi||^2`.
pub fn log_likelihood(
    store: &EmbeddingStore,
    db: &Database,
    relations: &[RelId],
    lambda: f64,
    extra: Option<&[LabeledCell]>,
) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    if !store.all_finite() {
        return Err(Error::Divergence("non-finite parameter in likelihood".into()));
    }
    let cell_ll = |c: LabeledCell| log_prob(store.logit(c.relation, c.row, c.col), c.label);
    let mut ll: f64 = relations.iter().flat_map(|&r| db.cells(r)).map(cell_ll).sum();
    if let Some(cells) = extra {
        ll += cells.iter().copied().map(cell_ll).sum::<f64>();
    }
    Ok(ll - lambda * store.squared_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{build_database, Observation, SchemaManifest, TupleRecord};

    fn tiny_db(records: Vec<TupleRecord>) -> Database {
        let m = SchemaManifest::new()
            .with_type("user")
            .with_type("item")
            .with_relation("R", "user", "item", Observation::Explicit);
        build_database(&m, records).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-16);
        assert!((sigmoid(-3.7) - (1.0 - sigmoid(3.7))).abs() < 1e-15);
        assert!(sigmoid(700.0) <= 1.0 && sigmoid(-700.0) > 0.0);
        assert!(sigmoid(-700.0).is_finite());
    }

    #[test]
    fn sigmoid_antisymmetry_sweep() {
        let mut s = -30.0;
        while s <= 30.0 {
            assert!((sigmoid(s) + sigmoid(-s) - 1.0).abs() <= 1e-15, "s={s}");
            s += 0.173;
        }
    }

    #[test]
    fn log_sigmoid_matches_direct_form() {
        for s in [-20.0, -3.0, -0.1, 0.0, 0.4, 5.0, 20.0] {
            assert!((log_sigmoid(s) - sigmoid(s).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn score_examples() {
        let db = tiny_db(vec![TupleRecord::new("R", "u", "b", 1)]);
        let mut store = EmbeddingStore::zeros(db.shared_registry(), 2, false).unwrap();
        assert_eq!(store.score(0, 0, 0), 0.5);
        store.raw_vectors_mut().copy_from_slice(&[1.0, 0.0, 2.0, 0.0]);
        assert!((store.score(0, 0, 0) - 0.8807970779778823).abs() < 1e-16);
        assert!((store.score_named("R", "u", "b").unwrap() - 0.8807970779778823).abs() < 1e-16);
        assert!(matches!(store.score_named("R", "zz", "b"), Err(Error::UnknownEntity(_))));

        let mut biased = EmbeddingStore::zeros(db.shared_registry(), 2, true).unwrap();
        let b = biased.biases_mut().unwrap();
        b.entity.copy_from_slice(&[1.0, 0.5]);
        b.relation[0] = -1.5;
        assert_eq!(biased.score(0, 0, 0), 0.5);
    }

    #[test]
    fn likelihood_examples() {
        let db = tiny_db(vec![TupleRecord::new("R", "u", "b", 1)]);
        let store = EmbeddingStore::zeros(db.shared_registry(), 3, false).unwrap();
        let ll = log_likelihood(&store, &db, &[0], 0.0, None).unwrap();
        assert!((ll + std::f64::consts::LN_2).abs() < 1e-15);

        let empty = tiny_db(vec![]);
        let mut reg = (*empty.shared_registry()).clone();
        let ty = reg.type_id("user").unwrap();
        reg.intern(ty, "solo").unwrap();
        let one = Arc::new(reg);
        let store = EmbeddingStore::from_parts(one, 2, vec![1.0, 1.0], None).unwrap();
        let ll = log_likelihood(&store, &empty, &[0], 0.5, None).unwrap();
        assert_eq!(ll, -1.0);
        assert_eq!(log_likelihood(&store, &empty, &[0], 0.0, None).unwrap(), 0.0);
        assert!(log_likelihood(&store, &empty, &[0], -1.0, None).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let db = tiny_db((0..5).map(|i| TupleRecord::new("R", &format!("u{i}"), "b", 1)).collect());
        let a = init_embeddings(&db, 4, 11, 0.01, false).unwrap();
        let b = init_embeddings(&db, 4, 11, 0.01, false).unwrap();
        let c = init_embeddings(&db, 4, 12, 0.01, false).unwrap();
        assert!(a.bit_identical(&b));
        assert!(!a.bit_identical(&c));
        assert!(a.raw_vectors().len() >= 10);
        assert!(a.raw_vectors().iter().all(|x| x.abs() < 0.01));
        assert!(init_embeddings(&db, 0, 1, 0.01, false).is_err());
        assert!(init_embeddings(&db, 2, 1, 0.0, false).is_err());
        let biased = init_embeddings(&db, 2, 1, 0.01, true).unwrap();
        assert!(biased.biases().unwrap().entity.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_parameters_rejected() {
        let db = tiny_db(vec![TupleRecord::new("R", "u", "b", 1)]);
        assert!(EmbeddingStore::from_parts(db.shared_registry(), 1, vec![f64::NAN, 0.0], None).is_err());
    }
}
