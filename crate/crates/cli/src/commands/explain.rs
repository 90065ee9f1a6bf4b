use relstab_core::explain::save_relevance_map;
use relstab_core::model::{predict, Network};

use super::{load_data, load_model};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::write_text;

pub fn explain(cfg: &ExperimentConfig, ids: &[usize]) -> CliResult<()> {
    let ds = load_data(cfg)?;
    let missing: Vec<String> = ids.iter().filter(|&&id| ds.position_of_id(id).is_none()).map(|id| id.to_string()).collect();
    if !missing.is_empty() {
        return Err(CliError::config(format!("unknown image id(s): {}", missing.join(", "))));
    }
    let ckpt = load_model(cfg)?;
    let net = Network::new(&ckpt.config, &ckpt.params);

    let mut predictions = String::from("id,label,predicted\n");
    let mut written = 0;
    for &id in ids {
        let i = ds.position_of_id(id).expect("checked above");
        let image = &ds.images[i];
        let predicted = predict(&net, std::slice::from_ref(image))?[0];
        predictions.push_str(&format!("{id},{},{predicted}\n", ds.labels[i]));
        for &kind in &cfg.explainers {
            let explainer = cfg.explainer(kind);
            let map = explainer.explain(&net, image)?.with_source(id.to_string());
            let path = cfg.out.join("maps").join(format!("{id:04}_{kind}.pgm"));
            save_relevance_map(&path, &map, explainer.seed())?;
            written += 1;
        }
    }
    write_text(&cfg.out.join("predictions.csv"), &predictions)?;
    println!("wrote {written} relevance maps to {}", cfg.out.join("maps").display());
    Ok(())
}
