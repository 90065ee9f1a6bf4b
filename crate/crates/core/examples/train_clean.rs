//! Trains the default CNN on a freshly generated synthetic corpus and prints
//! the per-epoch trace.
//!
//! `cargo run -p relstab-core --example train_clean -- [epochs]`

use std::time::Instant;

use relstab_core::datagen::{generate_dataset, split_train_val, SyntheticSpec};
use relstab_core::model::{build_default_model, train, TrainConfig};

fn main() -> relstab_core::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let data = generate_dataset::<f32>(&SyntheticSpec::default())?;
    let (tr, va) = split_train_val(&data, 0.8, 1)?;
    let (cfg, params) = build_default_model::<f32>(1);
    let tc = TrainConfig { epochs, ..TrainConfig::default() };
    let start = Instant::now();
    let (_, trace) = train(&tc, &cfg, params, &tr, &va)?;
    for (i, (l, a)) in trace.loss.iter().zip(&trace.val_accuracy).enumerate() {
        println!("epoch {:>2}  loss {l:.5}  val_accuracy {a:.4}", i + 1);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
