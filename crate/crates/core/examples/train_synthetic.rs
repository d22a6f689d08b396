//! Fit a planted two-relation database and watch the objective climb.

use relfactor::model::log_prob;
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let planted = generate_planted(&SynthSpec { n_users: 100, n_items: 100, ..SynthSpec::default() })?;
    let db = &planted.db;
    println!("R: {} cells, C: {} positives", db.tuple_count(0), db.tuple_count(1));

    let config = TrainConfig { k: 8, gamma: 0.05, epochs: 30, ..TrainConfig::default() }.with_relations(["R", "C"]);
    let (model, log) = train(db, &config, None)?;
    for e in log.epochs.iter().step_by(5) {
        println!("epoch {:>3}  objective {:>12.4}  {} examples", e.epoch, e.objective, e.examples);
    }
    let cells: Vec<_> = db.cells(0).collect();
    println!("R mean log-likelihood after training: {:.4}", cells.iter().map(|c| log_prob(model.logit(c.relation, c.row, c.col), c.label)).sum::<f64>() / cells.len() as f64);
    Ok(())
}
