use rand::Rng;

use super::REJECTION_CAP;
use crate::error::{Error, Result};
use crate::schema::{Database, LabeledCell, Observation, RelId};

/// Negatives drawn for one relation in one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeDraw {
    pub relation: String,
    pub positives: usize,
    pub requested: usize,
    pub sampled: usize,
    /// Draws that hit the rejection cap and were accepted anyway.
    pub degenerate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NegativeSample {
    pub cells: Vec<LabeledCell>,
    pub degenerate: usize,
}

/// `round(neg_ratio * positives)`.
pub fn negative_count(positives: usize, neg_ratio: f64) -> usize {
    (neg_ratio * positives as f64).round() as usize
}

fn populations(db: &Database, rel: RelId, count: usize) -> Result<(u32, u32)> {
    let r = db.registry().relation(rel);
    let rows = db.registry().entity_count(r.row_type) as u32;
    let cols = db.registry().entity_count(r.col_type) as u32;
    if count > 0 && (rows == 0 || cols == 0) {
        return Err(Error::InvalidArgument(format!(
            "relation `{}` has an empty row or column population",
            r.name
        )));
    }
    Ok((rows, cols))
}

/// Draws `count` cells uniformly over rows x cols of a positives-only
/// relation, resampling cells observed positive. After `REJECTION_CAP`
/// failed retries the last draw is kept and counted as degenerate.
/// Duplicates across draws are allowed.
pub fn sample_negatives<R: Rng>(
    db: &Database,
    rel: RelId,
    count: usize,
    rng: &mut R,
) -> Result<NegativeSample> {
    let relation = db.registry().relation(rel);
    if !relation.positives_only() {
        return Err(Error::InvalidArgument(format!(
            "negative sampling requires a positives-only relation, `{}` is not",
            relation.name
        )));
    }
    let (rows, cols) = populations(db, rel, count)?;
    let store = db.tuples(rel);
    let mut out = NegativeSample::default();
    out.cells.reserve(count);
    for _ in 0..count {
        let mut tries = 0;
        loop {
            let row = rng.random_range(0..rows);
            let col = rng.random_range(0..cols);
            tries += 1;
            let observed = store.contains_key(&(row, col));
            if !observed || tries >= REJECTION_CAP {
                out.degenerate += usize::from(observed);
                out.cells.push(LabeledCell { relation: rel, row, col, label: 0 });
                break;
            }
        }
    }
    Ok(out)
}

/// Cells of a fully observed relation drawn uniformly and labeled by
/// lookup; every unrecorded cell is a true negative, so nothing is
/// rejected.
fn sample_fully_observed<R: Rng>(db: &Database, rel: RelId, count: usize, rng: &mut R) -> Result<Vec<LabeledCell>> {
    let (rows, cols) = populations(db, rel, count)?;
    Ok((0..count)
        .map(|_| {
            let row = rng.random_range(0..rows);
            let col = rng.random_range(0..cols);
            let label = db.lookup_cell(rel, row, col).unwrap_or(0);
            LabeledCell { relation: rel, row, col, label }
        })
        .collect())
}

fn enumerate_unobserved(db: &Database, rel: RelId) -> Vec<LabeledCell> {
    let (rows, cols) = populations(db, rel, 0).unwrap_or((0, 0));
    let store = db.tuples(rel);
    let mut out = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if !store.contains_key(&(row, col)) {
                out.push(LabeledCell { relation: rel, row, col, label: 0 });
            }
        }
    }
    out
}

/// Negatives for one epoch across the selected relations, in relation
/// order. Relations with explicit labels contribute none.
pub fn draw_epoch_negatives<R: Rng>(
    db: &Database,
    relations: &[RelId],
    neg_ratio: f64,
    full_enumeration: bool,
    rng: &mut R,
) -> Result<(Vec<LabeledCell>, Vec<NegativeDraw>)> {
    let mut cells = Vec::new();
    let mut draws = Vec::new();
    for &rel in relations {
        let relation = db.registry().relation(rel);
        let positives = db.positive_count(rel);
        let requested = negative_count(positives, neg_ratio);
        let (sampled, degenerate) = match relation.observation {
            Observation::Explicit => continue,
            Observation::PositivesOnly => {
                let s = sample_negatives(db, rel, requested, rng)?;
                let n = s.cells.len();
                cells.extend(s.cells);
                (n, s.degenerate)
            }
            Observation::FullyObserved if full_enumeration => {
                let all = enumerate_unobserved(db, rel);
                let n = all.len();
                cells.extend(all);
                (n, 0)
            }
            Observation::FullyObserved => {
                let s = sample_fully_observed(db, rel, requested, rng)?;
                let n = s.len();
                cells.extend(s);
                (n, 0)
            }
        };
        draws.push(NegativeDraw {
            relation: relation.name.clone(),
            positives,
            requested,
            sampled,
            degenerate,
        });
    }
    Ok((cells, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::schema::{build_database, SchemaManifest, TupleRecord};

    fn db(records: Vec<TupleRecord>) -> Database {
        let m = SchemaManifest::new()
            .with_type("u")
            .with_type("w")
            .with_relation("UW", "u", "w", Observation::PositivesOnly)
            .with_relation("R", "u", "w", Observation::Explicit)
            .with_relation("C", "u", "w", Observation::FullyObserved);
        build_database(&m, records).unwrap()
    }

    #[test]
    fn parity_and_no_positive_hits() {
        let d = db(vec![
            TupleRecord::new("UW", "u1", "w1", 1),
            TupleRecord::new("UW", "u2", "w2", 1),
            TupleRecord::new("UW", "u3", "w3", 1),
            TupleRecord::new("UW", "u4", "w4", 1),
        ]);
        let mut r = rng::stream(1, "t", 0);
        let n = negative_count(d.positive_count(0), 1.0);
        let s = sample_negatives(&d, 0, n, &mut r).unwrap();
        assert_eq!(s.cells.len(), 4);
        assert_eq!(s.degenerate, 0);
        assert!(s.cells.iter().all(|c| !d.tuples(0).contains_key(&(c.row, c.col)) && c.label == 0));
        assert!(sample_negatives(&d, 0, 0, &mut r).unwrap().cells.is_empty());
    }

    #[test]
    fn dense_relation_hits_cap() {
        let recs = ["a", "b"]
            .iter()
            .flat_map(|u| ["x", "y"].iter().map(move |w| TupleRecord::new("UW", u, w, 1)))
            .collect();
        let d = db(recs);
        let s = sample_negatives(&d, 0, 1, &mut rng::stream(2, "t", 0)).unwrap();
        assert_eq!(s.cells.len(), 1);
        assert_eq!(s.degenerate, 1);
    }

    #[test]
    fn requires_positives_only() {
        let d = db(vec![TupleRecord::new("R", "a", "x", 1)]);
        assert!(sample_negatives(&d, 1, 1, &mut rng::stream(0, "t", 0)).is_err());
    }

    #[test]
    fn epoch_negatives_by_observation_kind() {
        let d = db(vec![
            TupleRecord::new("UW", "a", "x", 1),
            TupleRecord::new("R", "a", "x", 0),
            TupleRecord::new("R", "b", "y", 1),
            TupleRecord::new("C", "a", "y", 1),
        ]);
        let mut r = rng::stream(3, "t", 0);
        let (cells, draws) = draw_epoch_negatives(&d, &[0, 1, 2], 2.0, false, &mut r).unwrap();
        assert_eq!(draws.len(), 2);
        assert_eq!(draws[0].requested, 2);
        assert_eq!(draws[1].sampled, 2);
        assert_eq!(cells.len(), 4);
        for c in cells.iter().filter(|c| c.relation == 2) {
            assert_eq!(Some(c.label), d.lookup_cell(2, c.row, c.col));
        }
        let (all, _) = draw_epoch_negatives(&d, &[2], 1.0, true, &mut r).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|c| c.label == 0));
    }

    #[test]
    fn rounding() {
        assert_eq!(negative_count(3, 1.0), 3);
        assert_eq!(negative_count(5, 0.5), 3);
        assert_eq!(negative_count(0, 1.0), 0);
    }
}
