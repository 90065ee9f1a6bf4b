use std::collections::BTreeMap;

use rayon::prelude::*;
use relstab_core::corruption::{corrupt_corpus, didactic_stamp, CorruptionPlan, Corruptor};
use relstab_core::explain::{region_relevance_fraction, Explainer, ExplainerKind, LimeConfig, Target};
use relstab_core::model::{self, build_default_model, evaluate, ModelConfig, Network};
use relstab_core::rssa::rssa_global_with;
use relstab_core::{Dataset32, Params32};

use super::corrupt::corruptor;
use super::{eval_subset, fmt_opt, load_data, pool, split};
use crate::config::{ExperimentConfig, SweepKind};
use crate::error::CliResult;
use crate::svg::{line_plot, Series};
use crate::write_text;

pub const SWEEP_HEADER: &str = "kind,lambda,fraction,seed,val_accuracy,rssa_lrp,rssa_lime,rssa_occlusion,stamp_fraction,status";

const COLUMNS: [ExplainerKind; 3] = [ExplainerKind::Lrp, ExplainerKind::Lime, ExplainerKind::Occlusion];

/// One grid cell of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub lambda: f64,
    pub fraction: f64,
    pub seed: u64,
    pub val_accuracy: Option<f64>,
    /// Indexed like the `rssa_*` columns: LRP, LIME, occlusion.
    pub rssa: [Option<f64>; 3],
    pub stamp_fraction: Option<f64>,
    pub status: String,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let mut fields = vec![
            self.kind.name().to_string(),
            format!("{}", self.lambda),
            format!("{}", self.fraction),
            self.seed.to_string(),
            fmt_opt(self.val_accuracy),
        ];
        fields.extend(self.rssa.iter().map(|&v| fmt_opt(v)));
        fields.push(fmt_opt(self.stamp_fraction));
        fields.push(self.status.replace([',', '\n'], " "));
        fields.join(",")
    }
}

/// Grid cells in kind, λ, fraction order. The stamp has no λ, so it contributes one λ = 0 column.
pub fn cells(cfg: &ExperimentConfig) -> Vec<(SweepKind, f64, f64)> {
    let mut out = Vec::new();
    for &kind in &cfg.kinds {
        let lambdas: &[f64] = match kind {
            SweepKind::Didactic => &[0.0],
            SweepKind::Noise(_) => &cfg.lambdas,
        };
        for &lambda in lambdas {
            for &fraction in &cfg.fractions {
                out.push((kind, lambda, fraction));
            }
        }
    }
    out
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a ModelConfig,
    init: &'a Params32,
    train: &'a Dataset32,
    val: &'a Dataset32,
    eval: Dataset32,
    clean: Params32,
    explainers: Vec<Explainer>,
}

impl Context<'_> {
    fn fit(&self, train: &Dataset32) -> CliResult<Params32> {
        if train.images == self.train.images {
            return Ok(self.clean.clone());
        }
        let tc = self.cfg.sweep_train_config();
        Ok(model::train(&tc, self.model, self.init.clone(), train, self.val)?.0)
    }

    fn cell(&self, kind: SweepKind, lambda: f64, fraction: f64) -> CliResult<SweepRow> {
        let plan = CorruptionPlan { fraction, corruptor: corruptor(self.cfg, kind, lambda), seed: self.cfg.seed };
        let (params, accuracy) = if self.cfg.test_only {
            let (noisy_val, _) = corrupt_corpus(self.val, &plan)?;
            let net = Network::new(self.model, &self.clean);
            (self.clean.clone(), evaluate(&net, &noisy_val)?)
        } else {
            let (noisy_train, _) = corrupt_corpus(self.train, &plan)?;
            let params = self.fit(&noisy_train)?;
            let accuracy = evaluate(&Network::new(self.model, &params), self.val)?;
            (params, accuracy)
        };
        let net = Network::new(self.model, &params);

        let mut rssa = [None; 3];
        for explainer in &self.explainers {
            let slot = COLUMNS.iter().position(|&k| k == explainer.kind()).expect("every kind has a column");
            rssa[slot] = Some(self.mean_rssa(&net, explainer, &plan.corruptor)?);
        }
        let stamp_fraction = match (&plan.corruptor, self.explainers.first()) {
            (Corruptor::Stamp(_), Some(explainer)) => Some(self.mean_stamp_fraction(&net, explainer, &plan.corruptor)?),
            _ => None,
        };
        Ok(SweepRow {
            kind,
            lambda,
            fraction,
            seed: self.cfg.seed,
            val_accuracy: Some(accuracy),
            rssa,
            stamp_fraction,
            status: "ok".into(),
        })
    }

    /// Mean RSSA between each evaluation image's explanation and that of its corrupted copy.
    fn mean_rssa(&self, net: &Network<'_, f32>, explainer: &Explainer, corruptor: &Corruptor) -> CliResult<f64> {
        let mut total = 0.0;
        for i in 0..self.eval.len() {
            let image = &self.eval.images[i];
            let target = explainer.target().resolve(net, image)?;
            let fixed = explainer.clone().with_target(Target::Class(target));
            let noisy = corruptor.apply(image, self.eval.labels[i], self.cfg.seed ^ i as u64)?;
            total += rssa_global_with(&fixed.explain(net, image)?.values, &fixed.explain(net, &noisy)?.values, &self.cfg.rssa)?;
        }
        Ok(total / self.eval.len() as f64)
    }

    fn mean_stamp_fraction(&self, net: &Network<'_, f32>, explainer: &Explainer, corruptor: &Corruptor) -> CliResult<f64> {
        let Corruptor::Stamp(spec) = corruptor else { unreachable!("only called for the stamp") };
        let mut total = 0.0;
        for i in 0..self.eval.len() {
            let label = self.eval.labels[i];
            let stamped = didactic_stamp(&self.eval.images[i], label, spec)?;
            let map = explainer.explain(net, &stamped)?;
            total += region_relevance_fraction(&map, &spec.footprint(label, map.height(), map.width())?)?.fraction;
        }
        Ok(total / self.eval.len() as f64)
    }
}

pub fn sweep(cfg: &ExperimentConfig) -> CliResult<()> {
    let ds = load_data(cfg)?;
    let (train, val) = split(cfg, &ds)?;
    let (model_config, init) = build_default_model::<f32>(cfg.seed);
    let tc = cfg.sweep_train_config();
    let clean = model::train(&tc, &model_config, init.clone(), &train, &val)?.0;
    let explainers = cfg
        .explainers
        .iter()
        .map(|&k| match cfg.explainer(k) {
            Explainer::Lime(c) => Explainer::Lime(LimeConfig { n_samples: cfg.sweep_lime_samples, ..c }),
            other => other,
        })
        .collect();
    let ctx = Context {
        cfg,
        model: &model_config,
        init: &init,
        train: &train,
        val: &val,
        eval: eval_subset(&val, cfg.sweep_eval_images),
        clean,
        explainers,
    };

    let grid = cells(cfg);
    let rows: Vec<SweepRow> = pool(cfg.jobs)?.install(|| {
        grid.par_iter()
            .map(|&(kind, lambda, fraction)| {
                ctx.cell(kind, lambda, fraction).unwrap_or_else(|e| SweepRow {
                    kind,
                    lambda,
                    fraction,
                    seed: cfg.seed,
                    val_accuracy: None,
                    rssa: [None; 3],
                    stamp_fraction: None,
                    status: format!("error: {e}"),
                })
            })
            .collect()
    });

    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    write_text(&cfg.out.join("sweep.csv"), &csv)?;
    write_text(&cfg.out.join("sweep_meta.csv"), &metadata_csv(cfg))?;
    write_plots(cfg, &rows)?;

    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("swept {} cells ({failed} failed) into {}", rows.len(), cfg.out.join("sweep.csv").display());
    Ok(())
}

/// Run settings that sweep.csv rows depend on but do not carry.
pub fn metadata_csv(cfg: &ExperimentConfig) -> String {
    let (corrupted, validation) = if cfg.test_only { ("validation", "corrupted") } else { ("training", "clean") };
    format!(
        "key,value\ncorrupted_split,{corrupted}\nvalidation,{validation}\nnoise_variance,lambda * whole-image intensity variance\nnoise_bound,clip to [0 1]\nepochs_per_cell,{}\nbatch_size,{}\nsplit_ratio,{}\neval_images,{}\nlime_samples,{}\n",
        cfg.sweep_epochs, cfg.sweep_batch_size, cfg.split_ratio, cfg.sweep_eval_images, cfg.sweep_lime_samples
    )
}

fn write_plots(cfg: &ExperimentConfig, rows: &[SweepRow]) -> CliResult<()> {
    for &kind in &cfg.kinds {
        let mut by_lambda: BTreeMap<u64, Series> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.kind == kind) {
            let series = by_lambda
                .entry(r.lambda.to_bits())
                .or_insert_with(|| Series { name: format!("λ={}", r.lambda), points: Vec::new() });
            series.points.push((r.fraction, r.val_accuracy.unwrap_or(f64::NAN)));
        }
        let series: Vec<Series> = by_lambda.into_values().collect();
        let title = format!("Validation accuracy, {kind}");
        write_text(&cfg.out.join(format!("accuracy_{kind}.svg")), &line_plot(&title, "corrupted fraction", "accuracy", &series))?;
    }

    let p0 = cfg.fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let mut series = Vec::new();
    for (slot, explainer) in COLUMNS.iter().enumerate() {
        if !cfg.explainers.contains(explainer) {
            continue;
        }
        for &kind in cfg.kinds.iter().filter(|k| matches!(k, SweepKind::Noise(_))) {
            let points = rows
                .iter()
                .filter(|r| r.kind == kind && r.fraction == p0)
                .map(|r| (r.lambda, r.rssa[slot].unwrap_or(f64::NAN)))
                .collect();
            series.push(Series { name: format!("{explainer} {kind}"), points });
        }
    }
    write_text(&cfg.out.join("rssa_vs_lambda.svg"), &line_plot(&format!("Mean RSSA at fraction {p0}"), "λ", "RSSA", &series))
}
