use relstab_core::corruption::{corrupt_image, didactic_stamp, NoiseKind, NoiseParams};
use relstab_core::explain::{region_relevance_fraction, Target};
use relstab_core::model::Network;
use relstab_core::rssa::{rssa_global_with, rssa_map_with, rssa_matrix, save_rssa_map, RssaMatrix};

use relstab_core::{Dataset32, Tensor32};

use super::{brain_mask, eval_subset, load_data, load_model, pool, split};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::svg::heatmap;
use crate::write_text;

/// λ used for the reported comparison and the saved example maps.
const REPORT_LAMBDA: f64 = 0.15;

/// `kind,lambda,rssa_<explainer>...` with the matrices side by side.
pub fn comparison_csv(matrices: &[RssaMatrix]) -> String {
    let Some(first) = matrices.first() else {
        return String::from("kind,lambda\n");
    };
    let mut out = String::from("kind,lambda");
    for m in matrices {
        out.push_str(&format!(",rssa_{}", m.explainer));
    }
    out.push('\n');
    for (r, kind) in first.kinds.iter().enumerate() {
        for (c, lambda) in first.lambdas.iter().enumerate() {
            out.push_str(&format!("{},{lambda}", kind.name()));
            for m in matrices {
                out.push_str(&format!(",{}", m.get(r, c)));
            }
            out.push('\n');
        }
    }
    out
}

fn matrix_svg(m: &RssaMatrix) -> String {
    let rows: Vec<String> = m.kinds.iter().map(|k| k.name().to_string()).collect();
    let cols: Vec<String> = m.lambdas.iter().map(|l| format!("λ={l}")).collect();
    let values: Vec<Vec<f64>> = (0..m.kinds.len()).map(|r| m.row(r).to_vec()).collect();
    heatmap(&format!("Mean RSSA, {}", m.explainer), &rows, &cols, &values)
}

pub fn rssa(cfg: &ExperimentConfig) -> CliResult<()> {
    let ds = load_data(cfg)?;
    let (_, val) = split(cfg, &ds)?;
    let eval = eval_subset(&val, cfg.eval_images);
    let ckpt = load_model(cfg)?;
    let net = Network::new(&ckpt.config, &ckpt.params);
    let grid = cfg.noise_grid();
    let workers = pool(cfg.jobs)?;

    let mut matrices = Vec::new();
    if !grid.kinds.is_empty() {
        for &kind in &cfg.explainers {
            let explainer = cfg.explainer(kind);
            let m = workers.install(|| rssa_matrix(&explainer, &net, &eval.images, &grid, &cfg.rssa))?;
            write_text(&cfg.out.join(format!("rssa_{kind}.csv")), &m.to_csv())?;
            write_text(&cfg.out.join(format!("rssa_{kind}.svg")), &matrix_svg(&m))?;
            matrices.push(m);
        }
        write_text(&cfg.out.join("comparison.csv"), &comparison_csv(&matrices))?;

        let report = grid.lambdas.iter().copied().find(|&l| l == REPORT_LAMBDA).or(grid.lambdas.last().copied());
        if let Some(lambda) = report {
            println!("mean RSSA at λ={lambda} over {} images:", eval.len());
            for &kind in &grid.kinds {
                let cells: Vec<String> = matrices
                    .iter()
                    .map(|m| format!("{}={:.4}", m.explainer, m.lookup(kind, lambda).unwrap_or(f64::NAN)))
                    .collect();
                println!("  {:<12} {}", kind.name(), cells.join("  "));
            }
            save_example_maps(cfg, &net, &eval.images[0], eval.labels[0], lambda)?;
        }
    }

    write_text(&cfg.out.join("didactic.csv"), &didactic_table(cfg, &net, &eval)?)?;
    println!("wrote RSSA results for {} explainer(s) to {}", cfg.explainers.len(), cfg.out.display());
    Ok(())
}

/// Spatial RSSA maps for the first evaluation image under Rician noise and under the stamp.
fn save_example_maps(cfg: &ExperimentConfig, net: &Network<'_, f32>, image: &Tensor32, label: usize, lambda: f64) -> CliResult<()> {
    let noisy = corrupt_image(image, &NoiseParams::new(NoiseKind::Rician, lambda, cfg.seed))?;
    for &kind in &cfg.explainers {
        let base = cfg.explainer(kind);
        let target = base.target().resolve(net, image)?;
        let fixed = base.with_target(Target::Class(target));
        let clean = fixed.explain(net, image)?;
        let stamped = didactic_stamp(image, label, &cfg.stamp)?;
        for (name, other) in [("rician", &noisy), ("didactic", &stamped)] {
            let map = rssa_map_with(&clean.values, &fixed.explain(net, other)?.values, &cfg.rssa)?;
            save_rssa_map(&cfg.out.join("rssa_maps").join(format!("{kind}_{name}_0000.pgm")), &map)?;
        }
    }
    Ok(())
}

/// Stamp and brain relevance fractions on stamped evaluation images, plus
/// RSSA between each image's clean and stamped explanations.
fn didactic_table(cfg: &ExperimentConfig, net: &Network<'_, f32>, eval: &Dataset32) -> CliResult<String> {
    let mut out = String::from("explainer,id,label,target,stamp_fraction,brain_fraction,rssa\n");
    for &kind in &cfg.explainers {
        let base = cfg.explainer(kind);
        for i in 0..eval.len() {
            let (image, label) = (&eval.images[i], eval.labels[i]);
            let stamped = didactic_stamp(image, label, &cfg.stamp)?;
            let target = base.target().resolve(net, &stamped)?;
            let fixed = base.clone().with_target(Target::Class(target));
            let on_stamp = fixed.explain(net, &stamped)?;
            let (h, w) = (on_stamp.height(), on_stamp.width());
            let stamp = region_relevance_fraction(&on_stamp, &cfg.stamp.footprint(label, h, w)?)?;
            let brain = region_relevance_fraction(&on_stamp, &brain_mask(cfg, eval, i))?;
            let similarity = rssa_global_with(&fixed.explain(net, image)?.values, &on_stamp.values, &cfg.rssa)?;
            out.push_str(&format!(
                "{},{},{label},{target},{},{},{similarity}\n",
                kind,
                eval.ids[i],
                stamp.fraction,
                brain.fraction
            ));
        }
    }
    Ok(out)
}
