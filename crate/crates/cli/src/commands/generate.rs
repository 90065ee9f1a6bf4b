use relstab_core::corpus::save_corpus;
use relstab_core::datagen::generate_dataset;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub fn generate(cfg: &ExperimentConfig) -> CliResult<()> {
    let spec = cfg.seeded();
    let ds = generate_dataset::<f32>(&spec)?;
    save_corpus(&cfg.out, &ds, Some(&spec))?;
    let counts = ds.class_counts(2);
    println!("wrote {} images ({} class 0, {} class 1) to {}", ds.len(), counts[0], counts[1], cfg.out.display());
    Ok(())
}
