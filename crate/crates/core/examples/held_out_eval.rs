//! Held-out evaluation with a validation checkpoint, compared with a
//! constant-0.5 baseline that labels every cell positive.

use relfactor::eval::{evaluate, split, SplitSpec};
use relfactor::synth::{generate_planted, LabelLink, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let spec = SynthSpec { n_users: 150, n_items: 150, link: LabelLink::Threshold, seed: 7, ..SynthSpec::default() };
    let db = generate_planted(&spec)?.db;
    let s = split(&db, &SplitSpec::held_out("R", 0.8, 7))?;
    println!("train {} / validation {} / test {}", s.train.tuple_count(0), s.validation.len(), s.test.len());

    for relations in [vec!["R"], vec!["R", "C"]] {
        let config = TrainConfig { k: 10, gamma: 0.05, epochs: 40, ..TrainConfig::default() }.with_relations(relations.iter().copied());
        let (model, log) = train(&s.train, &config, Some(&s.validation))?;
        let report = evaluate(&model, &s.test, 0.5)?;
        println!("{:<6} best epoch {:>2}  test F1 {:.4}", relations.join("+"), log.best_epoch.unwrap_or(0), report.f1());
    }

    let p = s.test.iter().filter(|c| c.label == 1).count() as f64 / s.test.len() as f64;
    println!("all-positive baseline F1 {:.4} (positive rate {p:.3})", 2.0 * p / (p + 1.0));
    Ok(())
}
