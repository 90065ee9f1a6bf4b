use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::explain::{as_batch, ExplainerKind, RelevanceMap, Target};
use crate::model::Classifier;
use crate::nn::softmax;
use crate::ridge::weighted_ridge;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimeConfig {
    /// The image is cut into `grid × grid` equal square segments.
    pub grid: usize,
    pub n_samples: usize,
    /// Proximity kernel width; `None` means `0.25·√segments`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    /// Value written into removed segments.
    pub baseline: f64,
    pub seed: u64,
    pub target: Target,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self { grid: 8, n_samples: 1000, kernel_width: None, ridge: 1.0, baseline: 0.0, seed: 1, target: Target::Predicted }
    }
}

impl LimeConfig {
    pub fn segments(&self) -> usize {
        self.grid * self.grid
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width.unwrap_or(0.25 * (self.segments() as f64).sqrt())
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.grid == 0 || h % self.grid != 0 || w % self.grid != 0 {
            return Err(Error::Config(format!("LIME grid {} must divide the {h}×{w} image", self.grid)));
        }
        if self.n_samples < self.segments() {
            return Err(Error::Config(format!(
                "LIME needs at least as many samples ({}) as segments ({})",
                self.n_samples,
                self.segments()
            )));
        }
        if !(self.kernel_width() > 0.0) || !(self.ridge > 0.0) {
            return Err(Error::Config("LIME kernel width and ridge strength must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimeExplanation<T> {
    /// Each segment's coefficient painted over its pixels.
    pub map: RelevanceMap<T>,
    /// Surrogate coefficient per segment, row-major over the grid.
    pub segment_weights: Vec<f64>,
    pub intercept: f64,
}

const LIME_BATCH: usize = 64;

/// Fits a proximity-weighted ridge surrogate of the target-class softmax
/// probability on random segment on/off masks.
pub fn lime_explain<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    image: &Tensor<T>,
    config: &LimeConfig,
) -> Result<LimeExplanation<T>> {
    let batch = as_batch(model, image)?;
    let [ch, h, w] = model.input_shape();
    config.validate(h, w)?;
    let target = config.target.resolve(model, image)?;
    let d = config.segments();
    let (seg_h, seg_w) = (h / config.grid, w / config.grid);
    let segment_of = |r: usize, c: usize| (r / seg_h) * config.grid + c / seg_w;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let masks: Vec<bool> = (0..config.n_samples * d).map(|_| rng.random_bool(0.5)).collect();

    let baseline = T::lit(config.baseline);
    let k = model.classes();
    let mut probs = Vec::with_capacity(config.n_samples);
    for chunk in masks.chunks(d * LIME_BATCH) {
        let images: Vec<Tensor<T>> = chunk
            .chunks(d)
            .map(|mask| {
                let mut img = batch.clone().reshape(vec![ch, h, w]).expect("same volume");
                for plane in img.data_mut().chunks_mut(h * w) {
                    for (i, v) in plane.iter_mut().enumerate() {
                        if !mask[segment_of(i / w, i % w)] {
                            *v = baseline;
                        }
                    }
                }
                img
            })
            .collect();
        let logits = model.logits(&Tensor::stack(&images)?)?;
        probs.extend(logits.data().chunks(k).map(|row| softmax(row)[target].as_f64()));
    }

    let kernel = config.kernel_width();
    let design: Vec<f64> = masks.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let weights: Vec<f64> = masks
        .chunks(d)
        .map(|m| {
            let removed = m.iter().filter(|&&b| !b).count() as f64 / d as f64;
            (-(removed * removed) / (kernel * kernel)).exp()
        })
        .collect();
    let fit = weighted_ridge(&design, d, &probs, &weights, config.ridge)?;

    let values = Tensor::from_fn(vec![h, w], |i| T::lit(fit.coefficients[segment_of(i / w, i % w)]));
    Ok(LimeExplanation {
        map: RelevanceMap { values, explainer: ExplainerKind::Lime, target, source: String::new() },
        segment_weights: fit.coefficients,
        intercept: fit.intercept,
    })
}
