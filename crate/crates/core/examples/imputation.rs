//! Recovering hidden category memberships for items from ratings and the
//! categories that remain.

use relfactor::eval::{evaluate, split, Side, SplitSpec};
use relfactor::schema::{build_database, LabeledCell, Observation, SchemaManifest, TupleRecord};
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    // Category membership stored with both labels so held-out cells include negatives.
    let spec = SynthSpec { n_users: 120, n_items: 120, n_categories: 10, density_c: 1.0, seed: 5, ..SynthSpec::default() };
    let planted = generate_planted(&spec)?;
    let manifest = SchemaManifest::new()
        .with_type("user")
        .with_type("item")
        .with_type("category")
        .with_relation("R", "user", "item", Observation::Explicit)
        .with_relation("C", "item", "category", Observation::Explicit);
    let reg = planted.db.registry();
    let mut tuples: Vec<TupleRecord> = planted.db.cells(0).map(|c| reg.cell_record(&c)).collect();
    for i in 0..spec.n_items {
        for c in 0..spec.n_categories {
            let y = planted.db.lookup("C", &format!("i{i}"), &format!("c{c}"))?.unwrap_or(0);
            tuples.push(TupleRecord::new("C", &format!("i{i}"), &format!("c{c}"), y));
        }
    }
    let db = build_database(&manifest, tuples)?;

    let s = split(&db, &SplitSpec::cold_start("C", Side::Row, 0.2, 5))?;
    let config = TrainConfig { k: 6, lambda: 0.01, gamma: 0.05, epochs: 50, ..TrainConfig::default() }.with_relations(["R", "C"]);
    let (model, _) = train(&s.train, &config, Some(&s.validation))?;
    let report = evaluate(&model, &s.test, 0.5)?;
    println!("{} items with hidden categories, F1 {:.4}", s.cold_entities.len(), report.f1());

    let top: Vec<&LabeledCell> = s.test.iter().filter(|c| model.score_cell(c) >= 0.9).take(5).collect();
    for c in top {
        let r = s.train.registry().cell_record(c);
        println!("  {} in {}: p={:.3} truth={}", r.e1, r.e2, model.score_cell(c), c.label);
    }
    Ok(())
}
