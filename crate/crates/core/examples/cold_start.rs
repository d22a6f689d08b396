//! Items with no training ratings, scored through what the category relation
//! says about them.

use relfactor::eval::{evaluate, split, Side, SplitSpec};
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let spec = SynthSpec { n_users: 150, n_items: 150, density_c: 0.5, seed: 11, ..SynthSpec::default() };
    let db = generate_planted(&spec)?.db;
    let s = split(&db, &SplitSpec::cold_start("R", Side::Col, 0.1, 11))?;
    println!("{} cold items, {} test cells", s.cold_entities.len(), s.test.len());
    for w in &s.warnings {
        println!("warning: {w}");
    }

    for relations in [vec!["R"], vec!["R", "C"]] {
        let config = TrainConfig { k: 4, lambda: 0.05, gamma: 0.05, epochs: 60, ..TrainConfig::default() }.with_relations(relations.iter().copied());
        let (model, _) = train(&s.train, &config, Some(&s.validation))?;
        println!("{:<6} cold-start test F1 {:.4}", relations.join("+"), evaluate(&model, &s.test, 0.5)?.f1());
    }
    Ok(())
}
