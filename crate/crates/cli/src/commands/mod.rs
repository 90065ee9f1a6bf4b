mod corrupt;
mod explain;
mod generate;
mod plot;
mod rssa;
mod sweep;
mod train;

pub use corrupt::corrupt;
pub use explain::explain;
pub use generate::generate;
pub use plot::plot;
pub use rssa::rssa;
pub use sweep::{sweep, SweepRow, SWEEP_HEADER};
pub use train::{train, trace_csv};

use relstab_core::checkpoint::{load_checkpoint, Checkpoint};
use relstab_core::corpus::load_corpus;
use relstab_core::datagen::{split_train_val, Dataset, Mask};
use relstab_core::{Dataset32, Scalar};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub(crate) fn load_data(cfg: &ExperimentConfig) -> CliResult<Dataset32> {
    let ds = load_corpus(&cfg.corpus)?;
    if ds.is_empty() {
        return Err(CliError::config(format!("corpus {} has no images", cfg.corpus.display())));
    }
    Ok(ds)
}

pub(crate) fn split(cfg: &ExperimentConfig, ds: &Dataset32) -> CliResult<(Dataset32, Dataset32)> {
    Ok(split_train_val(ds, cfg.split_ratio, cfg.seed)?)
}

pub(crate) fn load_model(cfg: &ExperimentConfig) -> CliResult<Checkpoint<f32>> {
    Ok(load_checkpoint(&cfg.checkpoint)?)
}

/// The brain mask stored with image `i`, or the spec's ellipse when the corpus carries none.
pub(crate) fn brain_mask<T: Scalar>(cfg: &ExperimentConfig, ds: &Dataset<T>, i: usize) -> Mask {
    ds.masks.get(i).cloned().unwrap_or_else(|| cfg.data.brain_mask())
}

/// Up to `n` rows taken round-robin over the classes, each class in dataset order.
pub(crate) fn eval_subset<T: Scalar>(ds: &Dataset<T>, n: usize) -> Dataset<T> {
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for (i, &label) in ds.labels.iter().enumerate() {
        if by_class.len() <= label {
            by_class.resize(label + 1, Vec::new());
        }
        by_class[label].push(i);
    }
    let longest = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let rows: Vec<usize> = (0..longest).flat_map(|k| by_class.iter().filter_map(move |c| c.get(k).copied())).take(n).collect();
    ds.subset(&rows)
}

pub(crate) fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Other(format!("cannot start worker pool: {e}")))
}

/// Empty string for NaN so absent values stay visibly absent in CSV.
pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}
