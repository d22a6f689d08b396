//! Seeded generators of planted-factor databases.
//!
//! Users, items and categories get Gaussian latent vectors. A user-item
//! preference relation `R` (both labels stored) and an item-category
//! relation `C` (positives only) are sampled from those vectors, so the
//! true model lies inside the family being fitted.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{dot, sigmoid};
use crate::rng;
use crate::schema::{Database, DatabaseBuilder, Observation, SchemaManifest, TupleRecord};

pub const USER_TYPE: &str = "user";
pub const ITEM_TYPE: &str = "item";
pub const CATEGORY_TYPE: &str = "category";
pub const RATING_RELATION: &str = "R";
pub const CATEGORY_RELATION: &str = "C";

/// How a planted logit becomes a label before noise is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelLink {
    /// `Bernoulli(sigmoid(dot))`.
    #[default]
    Bernoulli,
    /// `dot >= 0`.
    Threshold,
}

impl FromStr for LabelLink {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(LabelLink::Bernoulli),
            "threshold" => Ok(LabelLink::Threshold),
            _ => Err(Error::InvalidArgument(format!("unknown link `{s}` (bernoulli or threshold)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub k_true: usize,
    /// Label-flip probability.
    pub noise: f64,
    pub density_r: f64,
    pub density_c: f64,
    pub seed: u64,
    pub link: LabelLink,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 200,
            n_items: 200,
            n_categories: 20,
            k_true: 4,
            noise: 0.05,
            density_r: 0.2,
            density_c: 0.2,
            seed: 1,
            link: LabelLink::Bernoulli,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_users == 0 || self.n_items == 0 || self.k_true == 0 {
            return bad("users, items and k_true must be positive".into());
        }
        if !(0.0..0.5).contains(&self.noise) {
            return bad(format!("noise {} not in [0, 0.5)", self.noise));
        }
        for (name, d) in [("density_r", self.density_r), ("density_c", self.density_c)] {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("{name} {d} not in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn manifest(&self) -> SchemaManifest {
        let mut m = SchemaManifest::new()
            .with_type(USER_TYPE)
            .with_type(ITEM_TYPE)
            .with_relation(RATING_RELATION, USER_TYPE, ITEM_TYPE, Observation::Explicit);
        if self.n_categories > 0 {
            m = m
                .with_type(CATEGORY_TYPE)
                .with_relation(CATEGORY_RELATION, ITEM_TYPE, CATEGORY_TYPE, Observation::PositivesOnly);
        }
        m
    }
}

/// Generated database plus the factors that produced it.
#[derive(Clone, Debug)]
pub struct Planted {
    pub db: Database,
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
    pub categories: Vec<Vec<f64>>,
}

pub fn user_id(i: usize) -> String {
    format!("u{i}")
}

pub fn item_id(i: usize) -> String {
    format!("i{i}")
}

pub fn category_id(i: usize) -> String {
    format!("c{i}")
}

fn draw_factors<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn label<R: Rng>(a: &[f64], b: &[f64], spec: &SynthSpec, rng: &mut R) -> u8 {
    let s = dot(a, b);
    let y = match spec.link {
        LabelLink::Bernoulli => rng.random::<f64>() < sigmoid(s),
        LabelLink::Threshold => s >= 0.0,
    };
    let flip = spec.noise > 0.0 && rng.random::<f64>() < spec.noise;
    u8::from(y != flip)
}

/// Every user, item and category is registered, whether or not any of its
/// cells was observed.
pub fn generate_planted(spec: &SynthSpec) -> Result<Planted> {
    spec.validate()?;
    let mut frng = rng::stream(spec.seed, "factors", 0);
    let users = draw_factors(spec.n_users, spec.k_true, &mut frng);
    let items = draw_factors(spec.n_items, spec.k_true, &mut frng);
    let categories = draw_factors(spec.n_categories, spec.k_true, &mut frng);

    let mut b = DatabaseBuilder::new(&spec.manifest())?;
    for i in 0..spec.n_users {
        b.register_entity(USER_TYPE, &user_id(i))?;
    }
    for i in 0..spec.n_items {
        b.register_entity(ITEM_TYPE, &item_id(i))?;
    }
    for i in 0..spec.n_categories {
        b.register_entity(CATEGORY_TYPE, &category_id(i))?;
    }

    let mut crng = rng::stream(spec.seed, "cells", 0);
    for (u, uf) in users.iter().enumerate() {
        for (i, itf) in items.iter().enumerate() {
            if crng.random::<f64>() < spec.density_r {
                let y = label(uf, itf, spec, &mut crng);
                b.add(&TupleRecord::new(RATING_RELATION, &user_id(u), &item_id(i), y))?;
            }
        }
    }
    let mut crng = rng::stream(spec.seed, "cells", 1);
    for (i, itf) in items.iter().enumerate() {
        for (c, cf) in categories.iter().enumerate() {
            if crng.random::<f64>() < spec.density_c && label(itf, cf, spec, &mut crng) == 1 {
                b.add(&TupleRecord::new(CATEGORY_RELATION, &item_id(i), &category_id(c), 1))?;
            }
        }
    }
    Ok(Planted {
        db: b.build(),
        users,
        items,
        categories,
    })
}
