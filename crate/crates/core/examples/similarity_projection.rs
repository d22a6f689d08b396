//! Nearest neighbours across entity types and a 2-D PCA view of categories.

use relfactor::embed_tools::{nearest_neighbors, project_2d, Metric};
use relfactor::synth::{generate_planted, SynthSpec};
use relfactor::{train, TrainConfig};

fn main() -> relfactor::Result<()> {
    let planted = generate_planted(&SynthSpec { n_users: 80, n_items: 80, n_categories: 8, density_c: 0.6, ..SynthSpec::default() })?;
    let db = &planted.db;
    let config = TrainConfig { k: 6, gamma: 0.05, epochs: 40, ..TrainConfig::default() }.with_relations(["R", "C"]);
    let (model, _) = train(db, &config, None)?;
    let reg = model.registry();

    let query = reg.resolve_qualified("item:i0")?;
    let category = reg.type_id("category")?;
    for (metric, filter) in [(Metric::Cosine, None), (Metric::Dot, Some(category))] {
        let r = nearest_neighbors(&model, query, 4, metric, filter)?;
        println!("{metric:?} neighbours of item:i0");
        for (e, s) in r.neighbors {
            println!("  {:<12} {s:+.4}", reg.qualified_name(e));
        }
    }

    let cats: Vec<_> = reg.all_entities().filter(|e| e.ty == category).collect();
    for (e, x, y) in project_2d(&model, &cats)? {
        println!("{:<12} {x:+.4} {y:+.4}", reg.qualified_name(e));
    }
    Ok(())
}
