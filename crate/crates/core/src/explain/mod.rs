//! Relevance maps: layer-wise relevance propagation, LIME surrogates on a
//! segment grid, occlusion sensitivity, and how relevance splits across regions.

mod lime;
mod lrp;
mod occlusion;
mod region;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use lime::{lime_explain, LimeConfig, LimeExplanation};
pub use lrp::{lrp_explain, lrp_relevance, LrpConfig};
pub use occlusion::{occlusion_coverage, occlusion_explain, OcclusionConfig};
pub use region::{region_relevance_fraction, RegionFraction};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::{Classifier, Network};
use crate::nn::argmax;
use crate::pgm;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExplainerKind {
    Lrp,
    Lime,
    Occlusion,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 3] = [ExplainerKind::Lrp, ExplainerKind::Lime, ExplainerKind::Occlusion];

    pub fn name(self) -> &'static str {
        match self {
            ExplainerKind::Lrp => "lrp",
            ExplainerKind::Lime => "lime",
            ExplainerKind::Occlusion => "occlusion",
        }
    }

    /// The model output the explainer attributes.
    pub fn response(self) -> &'static str {
        match self {
            ExplainerKind::Lime => "probability",
            ExplainerKind::Lrp | ExplainerKind::Occlusion => "logit",
        }
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExplainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lrp" => Ok(ExplainerKind::Lrp),
            "lime" => Ok(ExplainerKind::Lime),
            "occlusion" | "occ" => Ok(ExplainerKind::Occlusion),
            other => Err(Error::Config(format!("unknown explainer {other:?} (expected lrp, lime or occlusion)"))),
        }
    }
}

/// Which class a relevance map explains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Target {
    /// The model's own prediction for the image.
    #[default]
    Predicted,
    Class(usize),
}

impl Target {
    /// Resolves to a concrete class index for `image` (`[C, H, W]`).
    pub fn resolve<T: Scalar, C: Classifier<T> + ?Sized>(self, model: &C, image: &Tensor<T>) -> Result<usize> {
        match self {
            Target::Class(k) if k < model.classes() => Ok(k),
            Target::Class(k) => Err(Error::Input(format!("target class {k} out of range for {} classes", model.classes()))),
            Target::Predicted => {
                let logits = model.logits(&as_batch(model, image)?)?;
                Ok(argmax(logits.data()))
            }
        }
    }
}

/// Signed per-pixel relevance with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceMap<T> {
    /// `[H, W]` relevance values.
    pub values: Tensor<T>,
    pub explainer: ExplainerKind,
    pub target: usize,
    pub source: String,
}

impl<T: Scalar> RelevanceMap<T> {
    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

/// A configured explainer.
#[derive(Clone, Debug, PartialEq)]
pub enum Explainer {
    Lrp(LrpConfig),
    Lime(LimeConfig),
    Occlusion(OcclusionConfig),
}

impl Explainer {
    /// Default configuration of the given kind.
    pub fn default_for(kind: ExplainerKind) -> Self {
        match kind {
            ExplainerKind::Lrp => Explainer::Lrp(LrpConfig::default()),
            ExplainerKind::Lime => Explainer::Lime(LimeConfig::default()),
            ExplainerKind::Occlusion => Explainer::Occlusion(OcclusionConfig::default()),
        }
    }

    pub fn kind(&self) -> ExplainerKind {
        match self {
            Explainer::Lrp(_) => ExplainerKind::Lrp,
            Explainer::Lime(_) => ExplainerKind::Lime,
            Explainer::Occlusion(_) => ExplainerKind::Occlusion,
        }
    }

    pub fn target(&self) -> Target {
        match self {
            Explainer::Lrp(c) => c.target,
            Explainer::Lime(c) => c.target,
            Explainer::Occlusion(c) => c.target,
        }
    }

    pub fn with_target(mut self, target: Target) -> Self {
        match &mut self {
            Explainer::Lrp(c) => c.target = target,
            Explainer::Lime(c) => c.target = target,
            Explainer::Occlusion(c) => c.target = target,
        }
        self
    }

    /// Seed of the stochastic explainers (0 for deterministic ones).
    pub fn seed(&self) -> u64 {
        match self {
            Explainer::Lime(c) => c.seed,
            _ => 0,
        }
    }

    pub fn explain<T: Scalar>(&self, net: &Network<'_, T>, image: &Tensor<T>) -> Result<RelevanceMap<T>> {
        match self {
            Explainer::Lrp(c) => lrp_explain(net, image, c),
            Explainer::Lime(c) => lime_explain(net, image, c).map(|e| e.map),
            Explainer::Occlusion(c) => occlusion_explain(net, image, c),
        }
    }
}

/// `[C, H, W]` image to a `[1, C, H, W]` batch after checking it fits the model.
pub(crate) fn as_batch<T: Scalar, C: Classifier<T> + ?Sized>(model: &C, image: &Tensor<T>) -> Result<Tensor<T>> {
    let [c, h, w] = model.input_shape();
    let ok = match *image.shape() {
        [ic, ih, iw] => [ic, ih, iw] == [c, h, w],
        [ih, iw] => c == 1 && [ih, iw] == [h, w],
        _ => false,
    };
    if !ok {
        return Err(Error::Input(format!("image shape {:?} does not match model input {:?}", image.shape(), [c, h, w])));
    }
    image.clone().reshape(vec![1, c, h, w])
}

/// Path of the sidecar CSV written beside a relevance-map PGM.
pub fn sidecar_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("csv")
}

/// Writes the map as a 16-bit PGM after affine rescaling to `[0, 65535]`, plus
/// a `min,max,explainer,target,seed,response` sidecar that undoes the rescale.
pub fn save_relevance_map<T: Scalar>(pgm_path: &Path, map: &RelevanceMap<T>, seed: u64) -> Result<()> {
    let (lo, hi) = map.values.min_max();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    let span = hi - lo;
    let scaled = map.values.map(|v| if span > 0.0 { T::lit(((v.as_f64() - lo) / span).clamp(0.0, 1.0)) } else { T::zero() });
    pgm::save_pgm(pgm_path, &scaled)?;
    let sidecar = format!(
        "min,max,explainer,target,seed,response\n{lo},{hi},{},{},{seed},{}\n",
        map.explainer,
        map.target,
        map.explainer.response()
    );
    fsutil::write_atomic(&sidecar_path(pgm_path), sidecar.as_bytes())
}

/// Reads a map written by [`save_relevance_map`], undoing the rescale.
pub fn load_relevance_map(pgm_path: &Path) -> Result<(RelevanceMap<f64>, u64)> {
    let scaled: Tensor<f64> = pgm::load_pgm(pgm_path)?;
    let side = sidecar_path(pgm_path);
    let text = String::from_utf8(fsutil::read(&side)?).map_err(|_| Error::Input(format!("{} is not UTF-8", side.display())))?;
    let row = text.lines().nth(1).ok_or_else(|| Error::Input(format!("{} has no data row", side.display())))?;
    let fields: Vec<&str> = row.split(',').collect();
    let bad = || Error::Input(format!("malformed sidecar {}", side.display()));
    if !(5..=6).contains(&fields.len()) {
        return Err(bad());
    }
    let lo: f64 = fields[0].parse().map_err(|_| bad())?;
    let hi: f64 = fields[1].parse().map_err(|_| bad())?;
    let explainer: ExplainerKind = fields[2].parse()?;
    let target: usize = fields[3].parse().map_err(|_| bad())?;
    let seed: u64 = fields[4].parse().map_err(|_| bad())?;
    let values = scaled.map(|q| lo + q * (hi - lo));
    let source = pgm_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((RelevanceMap { values, explainer, target, source }, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExplainerKind::ALL {
            assert_eq!(k.name().parse::<ExplainerKind>().unwrap(), k);
        }
        assert!("gradcam".parse::<ExplainerKind>().is_err());
    }

    #[test]
    fn saved_map_de_rescales() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let values = Tensor::<f32>::from_fn(vec![4, 6], |i| i as f32 * 0.5 - 3.0);
        let map = RelevanceMap { values: values.clone(), explainer: ExplainerKind::Lime, target: 1, source: "7".into() };
        save_relevance_map(&path, &map, 42).unwrap();
        let (back, seed) = load_relevance_map(&path).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(back.explainer, ExplainerKind::Lime);
        assert_eq!(back.target, 1);
        let step = (9.0 - -3.0) / 65535.0;
        for (a, b) in values.data().iter().zip(back.values.data()) {
            assert!((*a as f64 - b).abs() <= step);
        }
    }
}
