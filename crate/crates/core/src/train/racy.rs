//! Lock-free shared-parameter SGD. Workers read and write coordinates with
//! relaxed atomics and no other synchronization, so concurrent updates to
//! the same vector may interleave.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use super::{kernel, within_limit};
use crate::error::{Error, Result};
use crate::model::EmbeddingStore;
use crate::schema::LabeledCell;

struct Shared {
    k: usize,
    vectors: Vec<AtomicU64>,
    entity_bias: Vec<AtomicU64>,
    relation_offset: Vec<AtomicU64>,
}

fn atomics(values: &[f64]) -> Vec<AtomicU64> {
    values.iter().map(|v| AtomicU64::new(v.to_bits())).collect()
}

fn load(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(Ordering::Relaxed))
}

fn store(a: &AtomicU64, v: f64) {
    a.store(v.to_bits(), Ordering::Relaxed);
}

impl Shared {
    fn from_store(s: &EmbeddingStore) -> Self {
        let (eb, ro) = s
            .biases()
            .map_or((Vec::new(), Vec::new()), |b| (atomics(&b.entity), atomics(&b.relation)));
        Shared {
            k: s.k(),
            vectors: atomics(s.raw_vectors()),
            entity_bias: eb,
            relation_offset: ro,
        }
    }

    fn write_back(self, s: &mut EmbeddingStore) {
        for (dst, a) in s.raw_vectors_mut().iter_mut().zip(&self.vectors) {
            *dst = load(a);
        }
        if let Some(b) = s.biases_mut() {
            for (dst, a) in b.entity.iter_mut().zip(&self.entity_bias) {
                *dst = load(a);
            }
            for (dst, a) in b.relation.iter_mut().zip(&self.relation_offset) {
                *dst = load(a);
            }
        }
    }

    fn read_vec(&self, i: usize, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            *o = load(&self.vectors[i * self.k + d]);
        }
    }

    fn write_vec(&self, i: usize, v: &[f64]) {
        for (d, x) in v.iter().enumerate() {
            store(&self.vectors[i * self.k + d], *x);
        }
    }
}

fn worker(
    shared: &Shared,
    s: &EmbeddingStore,
    chunk: &[LabeledCell],
    gamma: f64,
    lambda: f64,
    abort: &AtomicBool,
) -> Result<()> {
    let biases = !shared.entity_bias.is_empty();
    let mut v1 = vec![0.0; shared.k];
    let mut v2 = vec![0.0; shared.k];
    for c in chunk {
        if abort.load(Ordering::Relaxed) {
            return Ok(());
        }
        let (i, j) = s.cell_indices(c.relation, c.row, c.col);
        shared.read_vec(i, &mut v1);
        shared.read_vec(j, &mut v2);
        let mut b = biases.then(|| {
            [
                load(&shared.entity_bias[i]),
                load(&shared.entity_bias[j]),
                load(&shared.relation_offset[c.relation]),
            ]
        });
        kernel(&mut v1, &mut v2, b.as_mut(), i == j, c.label, gamma, lambda);
        if !within_limit(&v1) || !within_limit(&v2) || !b.as_ref().is_none_or(|b| within_limit(b)) {
            abort.store(true, Ordering::Relaxed);
            return Err(Error::Divergence(format!(
                "parameter exceeded limit updating {}({}, {}) in racy mode",
                s.registry().relation(c.relation).name,
                c.row,
                c.col
            )));
        }
        shared.write_vec(i, &v1);
        if i != j {
            shared.write_vec(j, &v2);
        }
        if let Some(b) = b {
            store(&shared.entity_bias[i], b[0]);
            store(&shared.entity_bias[j], b[1]);
            store(&shared.relation_offset[c.relation], b[2]);
        }
    }
    Ok(())
}

/// Applies one epoch of examples with `threads` workers, each taking a
/// contiguous chunk of the shuffled stream.
pub(crate) fn run_epoch(
    s: &mut EmbeddingStore,
    examples: &[LabeledCell],
    threads: usize,
    gamma: f64,
    lambda: f64,
) -> Result<()> {
    let shared = Shared::from_store(s);
    let abort = AtomicBool::new(false);
    let chunk = examples.len().div_ceil(threads.max(1)).max(1);
    let view: &EmbeddingStore = s;
    let result = std::thread::scope(|scope| {
        let handles: Vec<_> = examples
            .chunks(chunk)
            .map(|part| {
                let (shared, abort) = (&shared, &abort);
                scope.spawn(move || worker(shared, view, part, gamma, lambda, abort))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("racy worker panicked"))
            .collect::<Result<Vec<()>>>()
    });
    result?;
    shared.write_back(s);
    Ok(())
}
