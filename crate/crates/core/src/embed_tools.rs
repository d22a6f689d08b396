//! Similarity queries and 2-D projection over the shared embedding space.

use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{dot, EmbeddingStore};
use crate::schema::{EntityRef, TypeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Dot,
    Cosine,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Metric::Dot),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}` (dot or cosine)"))),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity clamped to [-1, 1]; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        (dot(a, b) / d).clamp(-1.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborResult {
    pub query: EntityRef,
    pub metric: Metric,
    /// Descending by score; the query itself is never included.
    pub neighbors: Vec<(EntityRef, f64)>,
}

/// Top-`n` entities by similarity to `query`, optionally restricted to one
/// type. Ties are broken by ascending global ordinal (type-major order).
pub fn nearest_neighbors(
    store: &EmbeddingStore,
    query: EntityRef,
    n: usize,
    metric: Metric,
    type_filter: Option<TypeId>,
) -> Result<NeighborResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let registry = store.registry();
    if query.ty >= registry.type_count() || query.ordinal as usize >= registry.entity_count(query.ty) {
        return Err(Error::UnknownEntity(format!("{query:?}")));
    }
    let q = store.vector(query);
    if metric == Metric::Cosine && norm(q) == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cosine similarity is undefined for the zero vector of `{}`",
            registry.qualified_name(query)
        )));
    }
    let mut scored: Vec<(EntityRef, f64)> = registry
        .all_entities()
        .filter(|&e| e != query && type_filter.is_none_or(|t| e.ty == t))
        .map(|e| {
            let v = store.vector(e);
            let s = match metric {
                Metric::Dot => dot(q, v),
                Metric::Cosine => cosine(q, v),
            };
            (e, s)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(store.index(a.0).cmp(&store.index(b.0)))
    });
    scored.truncate(n);
    Ok(NeighborResult {
        query,
        metric,
        neighbors: scored,
    })
}

/// Projects the subset onto its top two principal components. Each axis is
/// signed so that its largest-magnitude loading is positive.
pub fn project_2d(store: &EmbeddingStore, subset: &[EntityRef]) -> Result<Vec<(EntityRef, f64, f64)>> {
    let rows: Vec<&[f64]> = subset.iter().map(|&e| store.vector(e)).collect();
    let coords = project_rows(&rows, store.k())?;
    Ok(subset.iter().zip(coords).map(|(&e, (x, y))| (e, x, y)).collect())
}

/// PCA projection of raw row vectors of dimension `k`.
pub fn project_rows(rows: &[&[f64]], k: usize) -> Result<Vec<(f64, f64)>> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument("projection needs at least 3 entities".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("projection needs k >= 2".into()));
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread <= 1e-12 * scale.max(f64::MIN_POSITIVE) || spread == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let axis = |c: usize| {
        let v = eig.eigenvectors.column(order[c]).into_owned();
        let mut lead = 0;
        for i in 1..k {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            -v
        } else {
            v
        }
    };
    let (a1, a2) = (axis(0), axis(1));
    let p1 = &centered * a1;
    let p2 = &centered * a2;
    Ok((0..n).map(|i| (p1[i], p2[i])).collect())
}

/// `type:id \t c1 ... ck`, tab separated, one entity per line.
pub fn export_vectors(store: &EmbeddingStore, w: &mut dyn Write) -> Result<()> {
    let registry = store.registry();
    for e in registry.all_entities() {
        write!(w, "{}", registry.qualified_name(e))?;
        for x in store.vector(e) {
            write!(w, "\t{x:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `type:id \t x \t y`.
pub fn write_projection(store: &EmbeddingStore, points: &[(EntityRef, f64, f64)], w: &mut dyn Write) -> Result<()> {
    for &(e, x, y) in points {
        writeln!(w, "{}\t{x:e}\t{y:e}", store.registry().qualified_name(e))?;
    }
    Ok(())
}
