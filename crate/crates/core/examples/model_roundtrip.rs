//! Save a trained model, load it back and score named pairs.

use relfactor::model::{load_model, save_model, Precision};
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let db = generate_planted(&SynthSpec { n_users: 40, n_items: 40, n_categories: 4, ..SynthSpec::default() })?.db;
    let config = TrainConfig { k: 4, epochs: 10, enable_biases: true, ..TrainConfig::default() }.with_relations(["R", "C"]);
    let (model, _) = train(&db, &config, None)?;

    let mut full = Vec::new();
    save_model(&model, &mut full, Precision::Full)?;
    let restored = load_model(full.as_slice())?;
    println!("full precision round trip bit-identical: {}", model.bit_identical(&restored));

    let mut compact = Vec::new();
    save_model(&model, &mut compact, Precision::Compact)?;
    println!("file size: {} bytes full, {} bytes compact", full.len(), compact.len());
    print!("{}", String::from_utf8_lossy(&full).lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    for (rel, a, b) in [("R", "u0", "i0"), ("C", "i3", "c1"), ("R", "u0", "nobody")] {
        match restored.score_named(rel, a, b) {
            Ok(p) => println!("{rel}({a}, {b}) = {p:.4}"),
            Err(e) => println!("{rel}({a}, {b}): {e}"),
        }
    }
    Ok(())
}
