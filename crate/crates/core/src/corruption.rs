//! Adversarial exemplars (Gaussian, Rician and χ² noise scaled by a
//! fraction λ of the image variance), didactic corner stamps, and
//! corruption of a chosen fraction of a corpus.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};

use crate::datagen::{permutation, Dataset, Mask};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Rician,
    ChiSquared,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Rician, NoiseKind::ChiSquared];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Rician => "rician",
            NoiseKind::ChiSquared => "chisq",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            "rician" | "rice" => Ok(NoiseKind::Rician),
            "chisq" | "chi2" | "chisquared" | "chi-squared" => Ok(NoiseKind::ChiSquared),
            other => Err(Error::Config(format!("unknown noise kind {other:?} (expected gaussian, rician or chisq)"))),
        }
    }
}

/// χ² degrees of freedom used for the χ² corruptor.
pub const CHI_SQUARED_DOF: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub kind: NoiseKind,
    /// Noise variance as a fraction of the image's intensity variance.
    pub lambda: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(kind: NoiseKind, lambda: f64, seed: u64) -> Self {
        Self { kind, lambda, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Input(format!("fractional variance λ must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }

    /// Noise standard deviation for this image: `√(λ · Var(X))`.
    pub fn sigma_for<T: Scalar>(&self, image: &Tensor<T>) -> f64 {
        (self.lambda * image_variance(image)).sqrt()
    }
}

/// Population variance of the pixel intensities (single-pass Welford).
pub fn image_variance<T: Scalar>(image: &Tensor<T>) -> f64 {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in image.data().iter().enumerate() {
        let x = v.as_f64();
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    m2 / image.len() as f64
}

/// Raw additive noise draws with standard deviation `sigma`, before clipping.
///
/// Gaussian draws are zero-mean; χ² draws are `s·χ²₂` with `s = σ/√(2k)`,
/// so they are non-negative and have variance `σ²`. Rician noise is not
/// additive and is rejected here.
pub fn additive_noise(kind: NoiseKind, sigma: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Input(format!("noise sigma must be finite and non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        NoiseKind::Gaussian => {
            if sigma == 0.0 {
                return Ok(vec![0.0; count]);
            }
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            Ok((0..count).map(|_| normal.sample(&mut rng)).collect())
        }
        NoiseKind::ChiSquared => {
            let scale = sigma / (2.0 * CHI_SQUARED_DOF).sqrt();
            if scale == 0.0 {
                return Ok(vec![0.0; count]);
            }
            let chi = ChiSquared::new(CHI_SQUARED_DOF).expect("positive dof");
            Ok((0..count).map(|_| scale * chi.sample(&mut rng)).collect())
        }
        NoiseKind::Rician => Err(Error::Input("Rician noise is not additive".into())),
    }
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn add_and_clip<T: Scalar>(image: &Tensor<T>, noise: &[f64]) -> Tensor<T> {
    let data = image.data().iter().zip(noise).map(|(&x, &n)| T::lit(clip01(x.as_f64() + n))).collect();
    Tensor::new(image.shape().to_vec(), data).expect("same shape")
}

/// `clip(X + n)` with `n ~ Normal(0, σ²)` per pixel.
pub fn gaussian_noise_with_sigma<T: Scalar>(image: &Tensor<T>, sigma: f64, seed: u64) -> Result<Tensor<T>> {
    let noise = additive_noise(NoiseKind::Gaussian, sigma, image.len(), seed)?;
    Ok(add_and_clip(image, &noise))
}

/// `clip(X + s·χ²₂)` with variance `σ²`.
pub fn chisq_noise_with_sigma<T: Scalar>(image: &Tensor<T>, sigma: f64, seed: u64) -> Result<Tensor<T>> {
    let noise = additive_noise(NoiseKind::ChiSquared, sigma, image.len(), seed)?;
    Ok(add_and_clip(image, &noise))
}

/// Magnitude model: `clip(√((X + n₁)² + n₂²))`, `n₁, n₂ ~ Normal(0, σ²)`.
pub fn rician_noise_with_sigma<T: Scalar>(image: &Tensor<T>, sigma: f64, seed: u64) -> Result<Tensor<T>> {
    if let Some(bad) = image.data().iter().find(|v| **v < T::zero()) {
        return Err(Error::Input(format!("Rician corruption needs a non-negative magnitude image, found {bad}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Input(format!("noise sigma must be finite and non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(image.map(|x| T::lit(clip01(x.as_f64()))));
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image
        .data()
        .iter()
        .map(|&x| {
            let real = x.as_f64() + normal.sample(&mut rng);
            let imag: f64 = normal.sample(&mut rng);
            T::lit(clip01(real.hypot(imag)))
        })
        .collect();
    Ok(Tensor::new(image.shape().to_vec(), data).expect("same shape"))
}

pub fn gaussian_corrupt<T: Scalar>(image: &Tensor<T>, params: &NoiseParams) -> Result<Tensor<T>> {
    params.validate()?;
    gaussian_noise_with_sigma(image, params.sigma_for(image), params.seed)
}

pub fn rician_corrupt<T: Scalar>(image: &Tensor<T>, params: &NoiseParams) -> Result<Tensor<T>> {
    params.validate()?;
    rician_noise_with_sigma(image, params.sigma_for(image), params.seed)
}

pub fn chisq_corrupt<T: Scalar>(image: &Tensor<T>, params: &NoiseParams) -> Result<Tensor<T>> {
    params.validate()?;
    chisq_noise_with_sigma(image, params.sigma_for(image), params.seed)
}

/// Dispatches on `params.kind`.
pub fn corrupt_image<T: Scalar>(image: &Tensor<T>, params: &NoiseParams) -> Result<Tensor<T>> {
    match params.kind {
        NoiseKind::Gaussian => gaussian_corrupt(image, params),
        NoiseKind::Rician => rician_corrupt(image, params),
        NoiseKind::ChiSquared => chisq_corrupt(image, params),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    TopLeft,
    TopRight,
}

/// A class-conditional glyph placed in a top corner, outside the brain.
#[derive(Clone, Debug, PartialEq)]
pub struct StampSpec {
    pub glyph_height: usize,
    pub glyph_width: usize,
    /// Row-major glyph bitmap.
    pub glyph: Vec<bool>,
    pub margin: usize,
    /// Corner for each class label.
    pub corners: Vec<Corner>,
    pub intensity: f64,
}

const BUILTIN_GLYPH: [&str; 12] = [
    "..##....##..",
    ".####..####.",
    ".####..####.",
    "..########..",
    ".##########.",
    ".#..####..#.",
    ".#..####..#.",
    ".##########.",
    ".####..####.",
    "..########..",
    "...######...",
    "....####....",
];

impl Default for StampSpec {
    fn default() -> Self {
        let glyph = BUILTIN_GLYPH.iter().flat_map(|row| row.bytes().map(|b| b == b'#')).collect();
        Self {
            glyph_height: 12,
            glyph_width: 12,
            glyph,
            margin: 2,
            corners: vec![Corner::TopLeft, Corner::TopRight],
            intensity: 1.0,
        }
    }
}

impl StampSpec {
    fn origin(&self, label: usize, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.glyph.len() != self.glyph_height * self.glyph_width {
            return Err(Error::Config("glyph bitmap size does not match its dimensions".into()));
        }
        if self.glyph_height + self.margin > height || self.glyph_width + self.margin > width {
            return Err(Error::Config(format!(
                "{}×{} glyph with margin {} does not fit a {height}×{width} image",
                self.glyph_height, self.glyph_width, self.margin
            )));
        }
        let corner = self
            .corners
            .get(label)
            .ok_or_else(|| Error::Config(format!("no stamp corner configured for class {label}")))?;
        let col = match corner {
            Corner::TopLeft => self.margin,
            Corner::TopRight => width - self.margin - self.glyph_width,
        };
        Ok((self.margin, col))
    }

    /// Bounding box of the glyph as placed for `label`.
    pub fn footprint(&self, label: usize, height: usize, width: usize) -> Result<Mask> {
        let (r0, c0) = self.origin(label, height, width)?;
        Ok(Mask::from_fn(height, width, |r, c| {
            (r0..r0 + self.glyph_height).contains(&r) && (c0..c0 + self.glyph_width).contains(&c)
        }))
    }
}

/// Overwrites the glyph's set pixels with the stamp intensity in the label's corner.
pub fn didactic_stamp<T: Scalar>(image: &Tensor<T>, label: usize, spec: &StampSpec) -> Result<Tensor<T>> {
    let (h, w) = match *image.shape() {
        [h, w] | [1, h, w] => (h, w),
        _ => return Err(Error::Input(format!("stamping needs a [H, W] or [1, H, W] image, got {:?}", image.shape()))),
    };
    let (r0, c0) = spec.origin(label, h, w)?;
    let mut out = image.clone();
    let value = T::lit(spec.intensity);
    let data = out.data_mut();
    for gr in 0..spec.glyph_height {
        for gc in 0..spec.glyph_width {
            if spec.glyph[gr * spec.glyph_width + gc] {
                data[(r0 + gr) * w + c0 + gc] = value;
            }
        }
    }
    Ok(out)
}

/// What to do to each selected exemplar.
#[derive(Clone, Debug, PartialEq)]
pub enum Corruptor {
    Noise { kind: NoiseKind, lambda: f64 },
    Stamp(StampSpec),
}

impl Corruptor {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Corruptor::Noise { kind, .. } => kind.name(),
            Corruptor::Stamp(_) => "didactic",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Corruptor::Noise { lambda, .. } => *lambda,
            Corruptor::Stamp(_) => 0.0,
        }
    }

    /// Applies the corruption to one image with the given per-image seed.
    pub fn apply<T: Scalar>(&self, image: &Tensor<T>, label: usize, seed: u64) -> Result<Tensor<T>> {
        match self {
            Corruptor::Noise { kind, lambda } => corrupt_image(image, &NoiseParams::new(*kind, *lambda, seed)),
            Corruptor::Stamp(spec) => didactic_stamp(image, label, spec),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionPlan {
    /// Fraction of the corpus to corrupt.
    pub fraction: f64,
    pub corruptor: Corruptor,
    pub seed: u64,
}

impl CorruptionPlan {
    /// Seed used for the image at `index`.
    pub fn image_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }
}

/// `round(p · n)` (half away from zero) indices chosen by a seeded shuffle, ascending.
pub fn select_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Input(format!("corruption fraction must lie in [0, 1], got {fraction}")));
    }
    let count = ((fraction * n as f64).round() as usize).min(n);
    let mut chosen = permutation(n, &mut ChaCha8Rng::seed_from_u64(seed));
    chosen.truncate(count);
    chosen.sort_unstable();
    Ok(chosen)
}

/// Corrupts a seeded `fraction` of the corpus. Labels, ids, masks and order are preserved.
pub fn corrupt_corpus<T: Scalar>(dataset: &Dataset<T>, plan: &CorruptionPlan) -> Result<(Dataset<T>, Vec<usize>)> {
    let chosen = select_indices(dataset.len(), plan.fraction, plan.seed)?;
    let mut out = dataset.clone();
    for &i in &chosen {
        out.images[i] = plan.corruptor.apply(&dataset.images[i], dataset.labels[i], plan.image_seed(i))?;
    }
    Ok((out, chosen))
}

/// Manifest CSV: `index,corrupted,kind,lambda,seed`, one row per image.
pub fn manifest_csv(len: usize, chosen: &[usize], plan: &CorruptionPlan) -> String {
    let mut out = String::from("index,corrupted,kind,lambda,seed\n");
    let mut flags = vec![false; len];
    for &i in chosen {
        flags[i] = true;
    }
    for (i, flag) in flags.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            u8::from(*flag),
            plan.corruptor.kind_name(),
            plan.corruptor.lambda(),
            plan.image_seed(i)
        ));
    }
    out
}
