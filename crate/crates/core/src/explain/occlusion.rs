use crate::error::{Error, Result};
use crate::explain::{as_batch, ExplainerKind, RelevanceMap, Target};
use crate::model::Classifier;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OcclusionConfig {
    pub patch: usize,
    pub stride: usize,
    pub baseline: f64,
    pub target: Target,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self { patch: 8, stride: 4, baseline: 0.0, target: Target::Predicted }
    }
}

fn starts(side: usize, patch: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=side - patch).step_by(stride)
}

fn validate(config: &OcclusionConfig, h: usize, w: usize) -> Result<()> {
    if config.patch == 0 || config.patch > h || config.patch > w {
        return Err(Error::Config(format!("occlusion patch {} does not fit a {h}×{w} image", config.patch)));
    }
    if config.stride == 0 {
        return Err(Error::Config("occlusion stride must be at least 1".into()));
    }
    Ok(())
}

/// How many patch positions cover each pixel, row-major.
pub fn occlusion_coverage(h: usize, w: usize, patch: usize, stride: usize) -> Vec<u32> {
    let mut cover = vec![0u32; h * w];
    for y in starts(h, patch, stride) {
        for x in starts(w, patch, stride) {
            for r in y..y + patch {
                for c in &mut cover[r * w + x..r * w + x + patch] {
                    *c += 1;
                }
            }
        }
    }
    cover
}

const OCCLUSION_BATCH: usize = 32;

/// Per-pixel mean drop of the target score when a covering patch is replaced by the baseline.
///
/// Pixels no patch covers get zero relevance.
pub fn occlusion_explain<T: Scalar, C: Classifier<T> + ?Sized>(
    model: &C,
    image: &Tensor<T>,
    config: &OcclusionConfig,
) -> Result<RelevanceMap<T>> {
    let batch = as_batch(model, image)?;
    let [ch, h, w] = model.input_shape();
    validate(config, h, w)?;
    let target = config.target.resolve(model, image)?;
    let k = model.classes();
    let reference = model.logits(&batch)?.data()[target].as_f64();

    let positions: Vec<(usize, usize)> =
        starts(h, config.patch, config.stride).flat_map(|y| starts(w, config.patch, config.stride).map(move |x| (y, x))).collect();
    let baseline = T::lit(config.baseline);
    let plain = batch.reshape(vec![ch, h, w])?;
    let mut sums = vec![0.0f64; h * w];
    for chunk in positions.chunks(OCCLUSION_BATCH) {
        let occluded: Vec<Tensor<T>> = chunk
            .iter()
            .map(|&(y, x)| {
                let mut img = plain.clone();
                for plane in img.data_mut().chunks_mut(h * w) {
                    for r in y..y + config.patch {
                        plane[r * w + x..r * w + x + config.patch].fill(baseline);
                    }
                }
                img
            })
            .collect();
        let logits = model.logits(&Tensor::stack(&occluded)?)?;
        for (&(y, x), row) in chunk.iter().zip(logits.data().chunks(k)) {
            let drop = reference - row[target].as_f64();
            for r in y..y + config.patch {
                for s in &mut sums[r * w + x..r * w + x + config.patch] {
                    *s += drop;
                }
            }
        }
    }
    let cover = occlusion_coverage(h, w, config.patch, config.stride);
    let values = Tensor::from_fn(vec![h, w], |i| if cover[i] == 0 { T::zero() } else { T::lit(sums[i] / cover[i] as f64) });
    Ok(RelevanceMap { values, explainer: ExplainerKind::Occlusion, target, source: String::new() })
}
