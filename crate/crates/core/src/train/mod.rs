//! SGD training over shuffled observed tuples plus per-epoch negatives.

mod racy;
mod sampling;

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::eval::{classify, f1_report};
use crate::model::{init_for_registry, log_likelihood, sigmoid, EmbeddingStore};
use crate::rng::{self, sub_seed};
use crate::schema::{Database, LabeledCell, RelId};

pub use self::sampling::{draw_epoch_negatives, negative_count, sample_negatives, NegativeDraw, NegativeSample};

/// Parameters whose magnitude exceeds this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Rejection retries per negative draw before accepting a degenerate cell.
pub const REJECTION_CAP: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParallelMode {
    /// Single-threaded; bit-reproducible for a fixed seed.
    #[default]
    Deterministic,
    /// Lock-free shared-parameter updates across worker threads.
    Racy,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub k: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub seed: u64,
    pub relations: Vec<String>,
    pub neg_ratio: f64,
    pub enable_biases: bool,
    pub init_scale: f64,
    pub parallel_mode: ParallelMode,
    /// Decision threshold used for validation F1.
    pub threshold: f64,
    /// Enumerate every unobserved cell of fully observed relations as a
    /// negative each epoch instead of sampling at parity.
    pub full_enumeration: bool,
    /// Worker count for racy mode; `None` uses the machine's parallelism.
    /// Capped by `RELFACTOR_THREADS` when set.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 30,
            lambda: 0.001,
            gamma: 0.01,
            epochs: 50,
            seed: 42,
            relations: Vec::new(),
            neg_ratio: 1.0,
            enable_biases: false,
            init_scale: 0.01,
            parallel_mode: ParallelMode::Deterministic,
            threshold: 0.5,
            full_enumeration: false,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn with_relations<I, S>(mut self, relations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.relations = relations.into_iter().map(Into::into).collect();
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.neg_ratio > 0.0 && self.neg_ratio.is_finite()) {
            return bad("neg_ratio must be positive");
        }
        Ok(())
    }
}

/// One completed epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Regularized log likelihood of this epoch's training examples after
    /// the epoch's updates.
    pub objective: f64,
    pub val_f1: Option<f64>,
    pub seconds: f64,
    pub epoch_seed: u64,
    pub examples: usize,
    pub negatives: Vec<NegativeDraw>,
    /// Sampled negatives that are positives in the validation set.
    pub leaked_negatives: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept when a validation set was given.
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    /// `epoch \t objective \t val_f1 \t seconds`, with a header row.
    pub fn write_tsv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "epoch\tobjective\tval_f1\tseconds")?;
        for e in &self.epochs {
            let f1 = e.val_f1.map_or_else(|| "NA".to_string(), |f| format!("{f}"));
            writeln!(w, "{}\t{}\t{}\t{:.6}", e.epoch, e.objective, f1, e.seconds)?;
        }
        Ok(())
    }
}

/// Applies one update to local copies of a pair of vectors and returns the
/// residual `y - p`. Both updates read the pre-step values. When `same` is
/// set the two copies belong to one entity and both deltas land in `v1`.
pub(crate) fn kernel(
    v1: &mut [f64],
    v2: &mut [f64],
    bias: Option<&mut [f64; 3]>,
    same: bool,
    y: u8,
    gamma: f64,
    lambda: f64,
) -> f64 {
    let mut s: f64 = v1.iter().zip(v2.iter()).map(|(a, b)| a * b).sum();
    if let Some(b) = bias.as_deref() {
        s += b[0] + b[1] + b[2];
    }
    let e = f64::from(y) - sigmoid(s);
    for (a, b) in v1.iter_mut().zip(v2.iter_mut()) {
        let (old_a, old_b) = (*a, *b);
        let new_a = old_a + gamma * (e * old_b - lambda * old_a);
        let new_b = old_b + gamma * (e * old_a - lambda * old_b);
        if same {
            *a = new_a + new_b - old_a;
            *b = *a;
        } else {
            *a = new_a;
            *b = new_b;
        }
    }
    if let Some(b) = bias {
        let d1 = gamma * (e - lambda * b[0]);
        let d2 = gamma * (e - lambda * b[1]);
        if same {
            b[0] += d1 + d2;
            b[1] = b[0];
        } else {
            b[0] += d1;
            b[1] += d2;
        }
        b[2] += gamma * e;
    }
    e
}

pub(crate) fn within_limit(values: &[f64]) -> bool {
    values.iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_LIMIT)
}

/// One SGD update on cell `(row, col)` of `rel` with label `y`; returns the
/// residual `y - p` computed before the update.
#[allow(clippy::too_many_arguments)]
pub fn sgd_step(
    store: &mut EmbeddingStore,
    rel: RelId,
    row: u32,
    col: u32,
    y: u8,
    gamma: f64,
    lambda: f64,
) -> Result<f64> {
    let mut scratch = Scratch::new(store.k());
    scratch.step(store, rel, row, col, y, gamma, lambda)
}

/// Reusable buffers for deterministic updates.
struct Scratch {
    v1: Vec<f64>,
    v2: Vec<f64>,
}

impl Scratch {
    fn new(k: usize) -> Self {
        Scratch {
            v1: vec![0.0; k],
            v2: vec![0.0; k],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        store: &mut EmbeddingStore,
        rel: RelId,
        row: u32,
        col: u32,
        y: u8,
        gamma: f64,
        lambda: f64,
    ) -> Result<f64> {
        let k = store.k();
        let (i, j) = store.cell_indices(rel, row, col);
        self.v1.copy_from_slice(store.vector_at(i));
        self.v2.copy_from_slice(store.vector_at(j));
        let mut bias = store
            .biases()
            .map(|b| [b.entity[i], b.entity[j], b.relation[rel]]);
        let e = kernel(&mut self.v1, &mut self.v2, bias.as_mut(), i == j, y, gamma, lambda);
        if !within_limit(&self.v1) || !within_limit(&self.v2) || !bias.as_ref().is_none_or(|b| within_limit(b)) {
            return Err(Error::Divergence(format!(
                "parameter exceeded {DIVERGENCE_LIMIT:e} updating {}({}, {})",
                store.registry().relation(rel).name,
                row,
                col
            )));
        }
        let buf = store.raw_vectors_mut();
        buf[i * k..(i + 1) * k].copy_from_slice(&self.v1);
        if i != j {
            buf[j * k..(j + 1) * k].copy_from_slice(&self.v2);
        }
        if let (Some(b), Some(nb)) = (store.biases_mut(), bias) {
            b.entity[i] = nb[0];
            b.entity[j] = nb[1];
            b.relation[rel] = nb[2];
        }
        Ok(e)
    }
}

fn resolve_relations(db: &Database, names: &[String]) -> Result<Vec<RelId>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let id = db.relation_id(name)?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

pub(crate) fn worker_count(requested: Option<usize>) -> usize {
    let base = requested.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    let cap = std::env::var("RELFACTOR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    cap.map_or(base, |c| base.min(c)).max(1)
}

fn validation_f1(store: &EmbeddingStore, cells: &[LabeledCell], threshold: f64) -> Result<f64> {
    let preds: Vec<u8> = cells.iter().map(|c| classify(store.score_cell(c), threshold)).collect();
    let labels: Vec<u8> = cells.iter().map(|c| c.label).collect();
    Ok(f1_report(&preds, &labels)?.f1())
}

/// Fits an embedding store. With a validation set, the parameters of the
/// epoch with the highest validation F1 are returned.
pub fn train(
    db: &Database,
    config: &TrainConfig,
    validation: Option<&[LabeledCell]>,
) -> Result<(EmbeddingStore, TrainLog)> {
    config.validate()?;
    let relations = resolve_relations(db, &config.relations)?;
    let observed: Vec<LabeledCell> = relations.iter().flat_map(|&r| db.cells(r)).collect();
    if observed.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let validation = validation.filter(|v| !v.is_empty());

    let mut store = init_for_registry(
        db.shared_registry(),
        config.k,
        sub_seed(config.seed, "init", 0),
        config.init_scale,
        config.enable_biases,
    )?;
    let val_positives: HashSet<(RelId, u32, u32)> = validation
        .into_iter()
        .flatten()
        .filter(|c| c.label == 1)
        .map(|c| (c.relation, c.row, c.col))
        .collect();

    let threads = worker_count(config.threads);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, EmbeddingStore)> = None;
    let mut scratch = Scratch::new(config.k);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut neg_rng = rng::stream(config.seed, "negatives", epoch as u64);
        let (negatives, draws) = draw_epoch_negatives(
            db,
            &relations,
            config.neg_ratio,
            config.full_enumeration,
            &mut neg_rng,
        )?;

        let mut examples = Vec::with_capacity(observed.len() + negatives.len());
        examples.extend_from_slice(&observed);
        examples.extend_from_slice(&negatives);
        let epoch_seed = sub_seed(config.seed, "shuffle", epoch as u64);
        examples.shuffle(&mut rng::stream(config.seed, "shuffle", epoch as u64));

        match config.parallel_mode {
            ParallelMode::Deterministic => {
                for c in &examples {
                    scratch.step(&mut store, c.relation, c.row, c.col, c.label, config.gamma, config.lambda)?;
                }
            }
            ParallelMode::Racy => {
                racy::run_epoch(&mut store, &examples, threads, config.gamma, config.lambda)?;
            }
        }

        let objective = log_likelihood(&store, db, &relations, config.lambda, Some(&negatives))?;
        let val_f1 = match validation {
            Some(v) => Some(validation_f1(&store, v, config.threshold)?),
            None => None,
        };
        if let Some(f1) = val_f1 {
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, store.clone()));
                log.best_epoch = Some(epoch);
            }
        }
        let leaked_negatives = negatives
            .iter()
            .filter(|c| val_positives.contains(&(c.relation, c.row, c.col)))
            .count();
        log.epochs.push(EpochRecord {
            epoch,
            objective,
            val_f1,
            seconds: started.elapsed().as_secs_f64(),
            epoch_seed,
            examples: examples.len(),
            negatives: draws,
            leaked_negatives,
        });
    }

    if let Some((_, kept)) = best {
        store = kept;
    }
    Ok((store, log))
}
