use std::collections::HashSet;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::schema::{Database, EntityRef, LabeledCell, RelId, TupleStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    HeldOut,
    ColdStart,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "held-out" | "held_out" => Ok(SplitMode::HeldOut),
            "cold-start" | "cold_start" => Ok(SplitMode::ColdStart),
            _ => Err(Error::InvalidArgument(format!("unknown split mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Row,
    Col,
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Side::Row),
            "col" => Ok(Side::Col),
            _ => Err(Error::InvalidArgument(format!("cold side must be `row` or `col`, got `{s}`"))),
        }
    }
}

/// Fraction of the non-cold target tuples kept for training in cold-start
/// splits; the rest is validation.
pub const COLD_START_TRAIN_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub target_relation: String,
    pub train_fraction: f64,
    pub cold_fraction: f64,
    pub cold_side: Side,
    pub seed: u64,
}

impl SplitSpec {
    pub fn held_out(target: &str, train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::HeldOut,
            target_relation: target.to_string(),
            train_fraction,
            cold_fraction: 0.1,
            cold_side: Side::Col,
            seed,
        }
    }

    pub fn cold_start(target: &str, cold_side: Side, cold_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::ColdStart,
            target_relation: target.to_string(),
            train_fraction: 0.8,
            cold_fraction,
            cold_side,
            seed,
        }
    }

    fn check(&self, mode: SplitMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidArgument(format!("split spec is in {:?} mode", self.mode)));
        }
        let f = match mode {
            SplitMode::HeldOut => self.train_fraction,
            SplitMode::ColdStart => self.cold_fraction,
        };
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("split fraction {f} is not in (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: Database,
    pub validation: Vec<LabeledCell>,
    pub test: Vec<LabeledCell>,
    /// Cold-start splits only.
    pub cold_entities: Vec<EntityRef>,
    pub warnings: Vec<String>,
}

fn replace_target(db: &Database, rel: RelId, cells: &[LabeledCell]) -> Result<Database> {
    let mut tuples: Vec<TupleStore> = (0..db.registry().relations().len())
        .map(|r| db.tuples(r).clone())
        .collect();
    tuples[rel] = cells.iter().map(|c| ((c.row, c.col), c.label)).collect();
    Database::from_parts(db.shared_registry(), tuples)
}

/// `(n_validation, n_test)` for the part left after training; an odd
/// remainder goes to validation.
pub fn remainder_split(remaining: usize) -> (usize, usize) {
    (remaining.div_ceil(2), remaining / 2)
}

/// Partitions the observed target tuples into train / validation / test.
/// Other relations pass to the training database unchanged.
pub fn split_held_out(db: &Database, spec: &SplitSpec) -> Result<Split> {
    spec.check(SplitMode::HeldOut)?;
    let rel = db.relation_id(&spec.target_relation)?;
    let mut cells: Vec<LabeledCell> = db.cells(rel).collect();
    if cells.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "target relation `{}` has no observed tuples",
            spec.target_relation
        )));
    }
    cells.shuffle(&mut rng::stream(spec.seed, "split", 0));
    let n_train = ((spec.train_fraction * cells.len() as f64).round() as usize).min(cells.len());
    let (n_val, _) = remainder_split(cells.len() - n_train);
    let test = cells.split_off(n_train + n_val);
    let validation = cells.split_off(n_train);
    Ok(Split {
        train: replace_target(db, rel, &cells)?,
        validation,
        test,
        cold_entities: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Withholds every target tuple of a random fraction of the entities on
/// `cold_side`. The candidate population is the entities with at least one
/// observed target tuple on that side.
pub fn split_cold_start(db: &Database, spec: &SplitSpec) -> Result<Split> {
    spec.check(SplitMode::ColdStart)?;
    let rel = db.relation_id(&spec.target_relation)?;
    let relation = db.registry().relation(rel);
    let ty = match spec.cold_side {
        Side::Row => relation.row_type,
        Side::Col => relation.col_type,
    };
    let side = |c: &LabeledCell| match spec.cold_side {
        Side::Row => c.row,
        Side::Col => c.col,
    };
    let all: Vec<LabeledCell> = db.cells(rel).collect();
    let mut population: Vec<u32> = all.iter().map(side).collect();
    population.sort_unstable();
    population.dedup();

    let mut warnings = Vec::new();
    if population.len() < 10 {
        warnings.push(format!(
            "only {} candidate entities on the cold side; the draw is coarse",
            population.len()
        ));
    }
    let n_cold = ((spec.cold_fraction * population.len() as f64 - 1e-9).ceil().max(0.0) as usize)
        .min(population.len());
    if n_cold == 0 {
        return Err(Error::InvalidArgument("cold entity set is empty".into()));
    }
    population.shuffle(&mut rng::stream(spec.seed, "split", 1));
    let mut cold: Vec<u32> = population[..n_cold].to_vec();
    cold.sort_unstable();
    let cold_set: HashSet<u32> = cold.iter().copied().collect();

    let (test, mut rest): (Vec<LabeledCell>, Vec<LabeledCell>) =
        all.into_iter().partition(|c| cold_set.contains(&side(c)));
    rest.shuffle(&mut rng::stream(spec.seed, "split", 2));
    let n_train = (COLD_START_TRAIN_FRACTION * rest.len() as f64).round() as usize;
    let validation = rest.split_off(n_train);

    Ok(Split {
        train: replace_target(db, rel, &rest)?,
        validation,
        test,
        cold_entities: cold.into_iter().map(|ordinal| EntityRef { ty, ordinal }).collect(),
        warnings,
    })
}

/// Dispatches on `spec.mode`.
pub fn split(db: &Database, spec: &SplitSpec) -> Result<Split> {
    match spec.mode {
        SplitMode::HeldOut => split_held_out(db, spec),
        SplitMode::ColdStart => split_cold_start(db, spec),
    }
}
