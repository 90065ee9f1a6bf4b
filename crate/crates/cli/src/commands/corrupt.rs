use relstab_core::corpus::{load_spec, save_corpus};
use relstab_core::corruption::{corrupt_corpus, manifest_csv, CorruptionPlan, Corruptor};

use super::load_data;
use crate::config::{ExperimentConfig, SweepKind};
use crate::error::CliResult;
use crate::write_text;

pub fn corruptor(cfg: &ExperimentConfig, kind: SweepKind, lambda: f64) -> Corruptor {
    match kind {
        SweepKind::Noise(kind) => Corruptor::Noise { kind, lambda },
        SweepKind::Didactic => Corruptor::Stamp(cfg.stamp.clone()),
    }
}

pub fn corrupt(cfg: &ExperimentConfig, kind: SweepKind, lambda: f64, fraction: f64) -> CliResult<()> {
    let ds = load_data(cfg)?;
    let plan = CorruptionPlan { fraction, corruptor: corruptor(cfg, kind, lambda), seed: cfg.seed };
    let (out, chosen) = corrupt_corpus(&ds, &plan)?;
    save_corpus(&cfg.out, &out, load_spec(&cfg.corpus)?.as_ref())?;
    write_text(&cfg.out.join("manifest.csv"), &manifest_csv(out.len(), &chosen, &plan))?;
    println!("corrupted {} of {} images ({kind}, λ={lambda}) into {}", chosen.len(), out.len(), cfg.out.display());
    Ok(())
}
