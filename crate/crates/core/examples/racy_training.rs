//! Lock-free parallel epochs versus the deterministic sequential loop.

use std::time::Instant;

use relfactor::eval::{evaluate, split, SplitSpec};
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::train::ParallelMode;
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let db = generate_planted(&SynthSpec { n_users: 400, n_items: 400, seed: 9, ..SynthSpec::default() })?.db;
    let s = split(&db, &SplitSpec::held_out("R", 0.8, 9))?;
    for (mode, threads) in [(ParallelMode::Deterministic, None), (ParallelMode::Racy, Some(4))] {
        let config = TrainConfig { k: 8, gamma: 0.05, epochs: 20, parallel_mode: mode, threads, ..TrainConfig::default() }
            .with_relations(["R", "C"]);
        let start = Instant::now();
        let (model, _) = train(&s.train, &config, Some(&s.validation))?;
        println!(
            "{mode:?}: {:.2}s, test F1 {:.4}",
            start.elapsed().as_secs_f64(),
            evaluate(&model, &s.test, 0.5)?.f1()
        );
    }
    Ok(())
}
