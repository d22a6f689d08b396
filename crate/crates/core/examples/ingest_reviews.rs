//! Raw ratings, reviews, categories and attributes to a binary database.

use relfactor::ingest::{
    build_attribute_relation, build_word_relations, filter_categories, read_attributes,
    read_categories, read_ratings, read_reviews, resolve_rating_conflicts, PreprocessConfig,
    ReviewSide,
};
use relfactor::schema::{build_database, Observation, SchemaManifest};

const RATINGS: &str = "\
ann\ttaqueria\t5\t100
ann\ttaqueria\t2\t200
bob\ttaqueria\t4\t
bob\tnoodle_bar\t1\t
cid\tnoodle_bar\t5\t
";

const REVIEWS: &str = "\
ann\ttaqueria\tGreat tacos, fresh salsa. Tacos again in 2 weeks!
bob\ttaqueria\tThe salsa was fresh and the tacos were great.
bob\tnoodle_bar\tSlow service, noodles were cold.
cid\tnoodle_bar\tLoved the noodles; the broth was great.
";

const CATEGORIES: &str = "\
taqueria\tMexican
taqueria\tRestaurants
noodle_bar\tRestaurants
noodle_bar\tNoodles
";

const ATTRIBUTES: &str = "\
taqueria\tWiFi\tfree
noodle_bar\tWiFi\tno
noodle_bar\tOutdoorSeating\ttrue
";

fn main() -> relfactor::Result<()> {
    let config = PreprocessConfig::default()
        .with_min_word_reviews(2)
        .with_min_category_entities(1);

    let ratings = read_ratings(RATINGS.as_bytes(), "ratings")?;
    let reviews = read_reviews(REVIEWS.as_bytes(), "reviews")?;
    let categories = read_categories(CATEGORIES.as_bytes(), "categories")?;
    let attributes = read_attributes(ATTRIBUTES.as_bytes(), "attributes")?;

    let mut tuples = resolve_rating_conflicts(&ratings, "R")?;
    tuples.extend(filter_categories(&categories, "C", &config));
    tuples.extend(build_attribute_relation(&attributes, "A")?);
    tuples.extend(build_word_relations(&reviews, ReviewSide::Item, "BW", &config));
    tuples.extend(build_word_relations(&reviews, ReviewSide::User, "UW", &config));

    for t in &tuples {
        println!("{}\t{}\t{}\t{}", t.relation, t.e1, t.e2, t.label);
    }

    let manifest = SchemaManifest::new()
        .with_type("user")
        .with_type("business")
        .with_type("category")
        .with_type("attribute")
        .with_type("word")
        .with_relation("R", "user", "business", Observation::Explicit)
        .with_relation("C", "business", "category", Observation::PositivesOnly)
        .with_relation("A", "business", "attribute", Observation::PositivesOnly)
        .with_relation("BW", "business", "word", Observation::PositivesOnly)
        .with_relation("UW", "user", "word", Observation::PositivesOnly);
    let db = build_database(&manifest, tuples)?;
    for r in db.registry().relations() {
        let id = db.relation_id(&r.name)?;
        println!("{}: {} tuples, {} positive", r.name, db.tuple_count(id), db.positive_count(id));
    }
    Ok(())
}
