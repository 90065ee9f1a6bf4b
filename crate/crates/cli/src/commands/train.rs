use relstab_core::checkpoint::{save_checkpoint, Checkpoint};
use relstab_core::model::{self, build_default_model, TrainTrace};

use super::{load_data, split};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::svg::{line_plot, Series};
use crate::write_text;

/// `epoch,loss,val_accuracy`, plus `train_accuracy` when it was tracked.
pub fn trace_csv(trace: &TrainTrace) -> String {
    let with_train = !trace.train_accuracy.is_empty();
    let mut out = String::from("epoch,loss,val_accuracy");
    if with_train {
        out.push_str(",train_accuracy");
    }
    out.push('\n');
    for e in 0..trace.epochs() {
        out.push_str(&format!("{},{},{}", e + 1, trace.loss[e], trace.val_accuracy[e]));
        if with_train {
            out.push_str(&format!(",{}", trace.train_accuracy[e]));
        }
        out.push('\n');
    }
    out
}

pub fn train(cfg: &ExperimentConfig) -> CliResult<()> {
    let ds = load_data(cfg)?;
    let (train_set, val_set) = split(cfg, &ds)?;
    let (config, init) = build_default_model::<f32>(cfg.seed);
    let (params, trace) = model::train(&cfg.train_config(), &config, init, &train_set, &val_set)?;

    save_checkpoint(&cfg.out.join("model.ckpt"), &Checkpoint::new(config, params))?;
    write_text(&cfg.out.join("trace.csv"), &trace_csv(&trace))?;
    let loss = Series { name: "train loss".into(), points: trace.loss.iter().enumerate().map(|(e, &l)| ((e + 1) as f64, l)).collect() };
    write_text(&cfg.out.join("loss.svg"), &line_plot("Loss over training epochs", "epoch", "loss", &[loss]))?;

    match (trace.loss.last(), trace.val_accuracy.last()) {
        (Some(l), Some(a)) => println!("{} epochs: final loss {l:.4}, validation accuracy {a:.4}", trace.epochs()),
        _ => println!("0 epochs: checkpoint holds the initial parameters"),
    }
    Ok(())
}
