//! Turns raw ratings, reviews, categories and attributes into binary tuple
//! streams.

mod porter;
mod raw;
mod text;

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::schema::TupleRecord;

pub use self::porter::porter_stem;
pub use self::raw::{
    read_attributes, read_categories, read_ratings, read_reviews, unescape_field,
};
pub use self::text::{
    default_stopwords, parse_stopwords, tokenize_review, PreprocessConfig, StemmerKind,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRating {
    pub user_id: String,
    pub item_id: String,
    pub stars: u8,
    pub timestamp: Option<i64>,
}

impl RawRating {
    pub fn new(user_id: &str, item_id: &str, stars: u8, timestamp: Option<i64>) -> Self {
        RawRating {
            user_id: user_id.to_string(),
            item_id: item_id.to_string(),
            stars,
            timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawReview {
    pub user_id: String,
    pub item_id: String,
    pub text: String,
}

impl RawReview {
    pub fn new(user_id: &str, item_id: &str, text: &str) -> Self {
        RawReview {
            user_id: user_id.to_string(),
            item_id: item_id.to_string(),
            text: text.to_string(),
        }
    }
}

/// Which entity of a review a word relation attaches to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReviewSide {
    Item,
    User,
}

/// 4 and 5 stars are a like, 1 to 3 a dislike.
pub fn binarize_rating(stars: u8) -> Result<u8> {
    match stars {
        4 | 5 => Ok(1),
        1..=3 => Ok(0),
        _ => Err(Error::InvalidArgument(format!("stars must be in 1..=5, got {stars}"))),
    }
}

/// Composite id for one value of a multi-valued attribute, e.g.
/// `Smoking(Outdoor)`.
pub fn unwrap_attribute(name: &str, value: &str) -> Result<String> {
    if name.is_empty() || value.is_empty() {
        return Err(Error::InvalidArgument("attribute name and value must be non-empty".into()));
    }
    Ok(format!("{name}({value})"))
}

/// Positive attribute tuples from `(item, name, value)` triples, deduplicated
/// in first-seen order.
pub fn build_attribute_relation(
    attributes: &[(String, String, String)],
    relation: &str,
) -> Result<Vec<TupleRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (item, name, value) in attributes {
        let attr = unwrap_attribute(name, value)?;
        if seen.insert((item.clone(), attr.clone())) {
            out.push(TupleRecord::new(relation, item, &attr, 1));
        }
    }
    Ok(out)
}

/// One positive tuple per distinct (entity, stem) pair, keeping only stems
/// that occur in at least `min_word_reviews` distinct reviews overall.
/// Output is sorted, so it does not depend on review order.
pub fn build_word_relations(
    reviews: &[RawReview],
    side: ReviewSide,
    relation: &str,
    config: &PreprocessConfig,
) -> Vec<TupleRecord> {
    let per_review: Vec<HashSet<String>> = reviews
        .iter()
        .map(|r| tokenize_review(&r.text, config).into_iter().collect())
        .collect();

    let mut review_freq: HashMap<&str, usize> = HashMap::new();
    for stems in &per_review {
        for stem in stems {
            *review_freq.entry(stem.as_str()).or_default() += 1;
        }
    }

    let mut pairs: Vec<(&str, &str)> = reviews
        .iter()
        .zip(&per_review)
        .flat_map(|(review, stems)| {
            let entity = match side {
                ReviewSide::Item => review.item_id.as_str(),
                ReviewSide::User => review.user_id.as_str(),
            };
            stems.iter().map(move |s| (entity, s.as_str()))
        })
        .filter(|(_, stem)| review_freq[stem] >= config.min_word_reviews)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
        .into_iter()
        .map(|(e, w)| TupleRecord::new(relation, e, w, 1))
        .collect()
}

/// Keeps categories assigned to at least `min_category_entities` distinct
/// items and emits the surviving (item, category) pairs once each.
pub fn filter_categories(
    assignments: &[(String, String)],
    relation: &str,
    config: &PreprocessConfig,
) -> Vec<TupleRecord> {
    let mut unique: IndexMap<(&str, &str), ()> = IndexMap::new();
    for (item, cat) in assignments {
        unique.insert((item.as_str(), cat.as_str()), ());
    }
    let mut support: HashMap<&str, usize> = HashMap::new();
    for &(_, cat) in unique.keys() {
        *support.entry(cat).or_default() += 1;
    }
    unique
        .keys()
        .filter(|(_, cat)| support[cat] >= config.min_category_entities)
        .map(|&(item, cat)| TupleRecord::new(relation, item, cat, 1))
        .collect()
}

/// Collapses ratings to one binary label per (user, item) cell. Agreeing
/// labels collapse; on conflict the latest timestamp wins, or the last
/// occurrence in stream order when timestamps are missing.
pub fn resolve_rating_conflicts(ratings: &[RawRating], relation: &str) -> Result<Vec<TupleRecord>> {
    type Seen = Vec<(usize, u8, Option<i64>)>;
    let mut cells: IndexMap<(&str, &str), Seen> = IndexMap::new();
    for (idx, r) in ratings.iter().enumerate() {
        let label = binarize_rating(r.stars)?;
        cells
            .entry((r.user_id.as_str(), r.item_id.as_str()))
            .or_default()
            .push((idx, label, r.timestamp));
    }
    Ok(cells
        .into_iter()
        .map(|((user, item), obs)| {
            let first = obs[0].1;
            let label = if obs.iter().all(|o| o.1 == first) {
                first
            } else if obs.iter().all(|o| o.2.is_some()) {
                obs.iter().max_by_key(|o| (o.2, o.0)).unwrap().1
            } else {
                obs.last().unwrap().1
            };
            TupleRecord::new(relation, user, item, label)
        })
        .collect())
}
