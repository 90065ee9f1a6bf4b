//! Synthetic two-class corpus: a bright elliptical "brain" with a small
//! blob whose horizontal position depends on the class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Binary region over an image grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Input(format!("mask of {height}×{width} needs {} bits, got {}", height * width, bits.len())));
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![true; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self { height: self.height, width: self.width, bits: self.bits.iter().map(|b| !b).collect() }
    }
}

/// Labelled images. Class 0 is the typically-developing analog, class 1 the ADHD analog.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    /// `[1, H, W]` single-channel images with intensities in `[0, 1]`.
    pub images: Vec<Tensor<T>>,
    pub labels: Vec<usize>,
    pub ids: Vec<usize>,
    /// One brain mask per image, or empty when unavailable.
    pub masks: Vec<Mask>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(images: Vec<Tensor<T>>, labels: Vec<usize>, ids: Vec<usize>, masks: Vec<Mask>) -> Result<Self> {
        let n = images.len();
        if labels.len() != n || ids.len() != n || !(masks.is_empty() || masks.len() == n) {
            return Err(Error::Input(format!(
                "dataset columns disagree: {n} images, {} labels, {} ids, {} masks",
                labels.len(),
                ids.len(),
                masks.len()
            )));
        }
        Ok(Self { images, labels, ids, masks })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Picks the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            images: rows.iter().map(|&i| self.images[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i]).collect(),
            masks: if self.masks.is_empty() { Vec::new() } else { rows.iter().map(|&i| self.masks[i].clone()).collect() },
        }
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for &l in &self.labels {
            if l < classes {
                counts[l] += 1;
            }
        }
        counts
    }

    pub fn position_of_id(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            images: self.images.iter().map(Tensor::cast).collect(),
            labels: self.labels.clone(),
            ids: self.ids.clone(),
            masks: self.masks.clone(),
        }
    }
}

/// Parameters of the synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub side: usize,
    /// Images per class; index is the label.
    pub counts: [usize; 2],
    /// Ellipse centre as `(x, y)` in pixel coordinates.
    pub center: (f64, f64),
    /// Ellipse semi-axes `(x, y)`.
    pub semi_axes: (f64, f64),
    pub base_intensity: f64,
    /// Horizontal blob offset from the centre: left for class 0, right for class 1.
    pub blob_offset: f64,
    /// Standard deviation of the blob's horizontal position jitter.
    pub blob_jitter_x: f64,
    pub blob_jitter_y: f64,
    pub blob_delta: f64,
    pub blob_radius: f64,
    /// Per-pixel Gaussian noise floor.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Jitter draws are clamped to this many standard deviations.
const JITTER_CLAMP: f64 = 3.0;

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            side: 64,
            counts: [500, 500],
            center: (31.5, 34.0),
            semi_axes: (24.0, 25.0),
            base_intensity: 0.6,
            blob_offset: 6.0,
            blob_jitter_x: 2.5,
            blob_jitter_y: 1.5,
            blob_delta: 0.15,
            blob_radius: 5.0,
            noise_sigma: 0.02,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.side < 16 {
            return bad(format!("image side {} is too small (minimum 16)", self.side));
        }
        if self.counts.iter().any(|&c| c == 0) {
            return bad(format!("every class needs at least one image, got {:?}", self.counts));
        }
        let finite = [
            self.center.0,
            self.center.1,
            self.semi_axes.0,
            self.semi_axes.1,
            self.base_intensity,
            self.blob_offset,
            self.blob_jitter_x,
            self.blob_jitter_y,
            self.blob_delta,
            self.blob_radius,
            self.noise_sigma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("synthetic spec contains a non-finite value".into());
        }
        if self.semi_axes.0 <= 0.0 || self.semi_axes.1 <= 0.0 {
            return bad("ellipse semi-axes must be positive".into());
        }
        if self.blob_radius < 0.0 || self.blob_jitter_x < 0.0 || self.blob_jitter_y < 0.0 || self.noise_sigma < 0.0 {
            return bad("blob radius, jitter and noise must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.base_intensity) || !(0.0..=1.0).contains(&(self.base_intensity + self.blob_delta)) {
            return bad("base intensity and base + blob delta must lie in [0, 1]".into());
        }
        let s = self.side as f64;
        let (cx, cy) = self.center;
        let (ax, ay) = self.semi_axes;
        if cx - ax < 0.0 || cx + ax > s - 1.0 || cy - ay < 0.0 || cy + ay > s - 1.0 {
            return bad("ellipse does not fit in the image".into());
        }
        // The blob bounding box at the extreme jittered position must stay inside the ellipse.
        let reach_x = self.blob_offset.abs() + JITTER_CLAMP * self.blob_jitter_x + self.blob_radius;
        let reach_y = JITTER_CLAMP * self.blob_jitter_y + self.blob_radius;
        if (reach_x / ax).powi(2) + (reach_y / ay).powi(2) > 1.0 {
            return bad(format!(
                "blob outside ellipse: offset {} + jitter {} + radius {} reaches ({reach_x:.2}, {reach_y:.2}) beyond semi-axes ({ax}, {ay})",
                self.blob_offset, self.blob_jitter_x, self.blob_radius
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn label_of(&self, index: usize) -> usize {
        usize::from(index >= self.counts[0])
    }

    /// Ellipse interior.
    pub fn brain_mask(&self) -> Mask {
        let (cx, cy) = self.center;
        let (ax, ay) = self.semi_axes;
        Mask::from_fn(self.side, self.side, |r, c| {
            ((c as f64 - cx) / ax).powi(2) + ((r as f64 - cy) / ay).powi(2) <= 1.0
        })
    }

    /// Sets one field from its `key=value` name, as written by [`Self::to_key_values`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || value.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")));
        let int = || value.trim().parse::<u64>().map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")));
        match key.trim() {
            "side" => self.side = int()? as usize,
            "count_class0" => self.counts[0] = int()? as usize,
            "count_class1" => self.counts[1] = int()? as usize,
            "center_x" => self.center.0 = float()?,
            "center_y" => self.center.1 = float()?,
            "semi_axis_x" => self.semi_axes.0 = float()?,
            "semi_axis_y" => self.semi_axes.1 = float()?,
            "base_intensity" => self.base_intensity = float()?,
            "blob_offset" => self.blob_offset = float()?,
            "blob_jitter_x" => self.blob_jitter_x = float()?,
            "blob_jitter_y" => self.blob_jitter_y = float()?,
            "blob_delta" => self.blob_delta = float()?,
            "blob_radius" => self.blob_radius = float()?,
            "noise_sigma" => self.noise_sigma = float()?,
            "seed" => self.seed = int()?,
            other => return Err(Error::Config(format!("unknown synthetic spec key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    /// `key=value` lines describing the spec.
    pub fn to_key_values(&self) -> String {
        format!(
            "side={}\ncount_class0={}\ncount_class1={}\ncenter_x={}\ncenter_y={}\nsemi_axis_x={}\nsemi_axis_y={}\n\
             base_intensity={}\nblob_offset={}\nblob_jitter_x={}\nblob_jitter_y={}\nblob_delta={}\nblob_radius={}\n\
             noise_sigma={}\nseed={}\n",
            self.side,
            self.counts[0],
            self.counts[1],
            self.center.0,
            self.center.1,
            self.semi_axes.0,
            self.semi_axes.1,
            self.base_intensity,
            self.blob_offset,
            self.blob_jitter_x,
            self.blob_jitter_y,
            self.blob_delta,
            self.blob_radius,
            self.noise_sigma,
            self.seed
        )
    }
}

fn clamped_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    z.clamp(-JITTER_CLAMP, JITTER_CLAMP) * sigma
}

/// One synthetic image, seeded by `spec.seed ^ index`.
pub fn generate_image<T: Scalar>(spec: &SyntheticSpec, index: usize) -> Tensor<T> {
    let label = spec.label_of(index);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index as u64);
    let dx = clamped_normal(&mut rng, spec.blob_jitter_x);
    let dy = clamped_normal(&mut rng, spec.blob_jitter_y);
    let side = if label == 0 { -1.0 } else { 1.0 };
    let (cx, cy) = spec.center;
    let (bx, by) = (cx + side * spec.blob_offset + dx, cy + dy);
    let brain = spec.brain_mask();
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let n = spec.side;
    Tensor::from_fn(vec![1, n, n], |i| {
        let (r, c) = (i / n, i % n);
        let mut v = 0.0;
        if brain.get(r, c) {
            v = spec.base_intensity;
            if (c as f64 - bx).powi(2) + (r as f64 - by).powi(2) <= spec.blob_radius * spec.blob_radius {
                v += spec.blob_delta;
            }
        }
        if spec.noise_sigma > 0.0 {
            v += noise.sample(&mut rng);
        }
        T::lit(v.clamp(0.0, 1.0))
    })
}

/// The full corpus: class 0 images first, then class 1.
pub fn generate_dataset<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let total = spec.total();
    let brain = spec.brain_mask();
    let images = (0..total).map(|i| generate_image(spec, i)).collect();
    let labels = (0..total).map(|i| spec.label_of(i)).collect();
    Dataset::new(images, labels, (0..total).collect(), vec![brain; total])
}

/// Stratified, seeded split. Each class contributes `round(ratio · count)`
/// items to the training part, clamped so both parts keep at least one.
pub fn split_train_val<T: Scalar>(dataset: &Dataset<T>, ratio: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Input(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let classes = dataset.labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..classes {
        let mut rows: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::Input(format!("class {class} has {} item(s); a split needs at least 2", rows.len())));
        }
        rows.shuffle(&mut rng);
        let k = ((ratio * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        train.extend_from_slice(&rows[..k]);
        val.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&val)))
}

/// Seeded permutation of `0..n`.
pub(crate) fn permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec { counts: [6, 4], ..SyntheticSpec::default() }
    }

    #[test]
    fn default_counts() {
        let spec = SyntheticSpec::default();
        assert_eq!(spec.total(), 1000);
        assert_eq!(spec.label_of(499), 0);
        assert_eq!(spec.label_of(500), 1);
        spec.validate().unwrap();
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = generate_dataset::<f32>(&small()).unwrap();
        let b = generate_dataset::<f32>(&small()).unwrap();
        assert_eq!(a, b);
        for img in &a.images {
            assert_eq!(img.shape(), &[1, 64, 64]);
            assert!(img.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(a.class_counts(2), vec![6, 4]);
    }

    #[test]
    fn no_noise_no_blob_means_identical_images() {
        let spec = SyntheticSpec { noise_sigma: 0.0, blob_delta: 0.0, ..small() };
        let d = generate_dataset::<f64>(&spec).unwrap();
        assert!(d.images.iter().all(|img| img == &d.images[0]));
    }

    #[test]
    fn blob_outside_ellipse_is_a_config_error() {
        let spec = SyntheticSpec { blob_offset: 30.0, ..small() };
        assert!(matches!(generate_dataset::<f32>(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn brain_mask_covers_blob_for_both_classes() {
        let spec = SyntheticSpec { noise_sigma: 0.0, ..small() };
        let d = generate_dataset::<f64>(&spec).unwrap();
        for (img, mask) in d.images.iter().zip(&d.masks) {
            for (i, &v) in img.data().iter().enumerate() {
                if v > spec.base_intensity + 1e-9 {
                    assert!(mask.bits()[i]);
                }
            }
        }
    }

    #[test]
    fn stratified_split_arithmetic() {
        let spec = SyntheticSpec { counts: [10, 10], ..SyntheticSpec::default() };
        let d = generate_dataset::<f32>(&spec).unwrap();
        let (tr, va) = split_train_val(&d, 0.8, 7).unwrap();
        assert_eq!(tr.class_counts(2), vec![8, 8]);
        assert_eq!(va.class_counts(2), vec![2, 2]);
        let mut all: Vec<usize> = tr.ids.iter().chain(&va.ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        let (tr2, _) = split_train_val(&d, 0.8, 7).unwrap();
        assert_eq!(tr.ids, tr2.ids);
    }

    #[test]
    fn split_needs_two_per_class() {
        let spec = SyntheticSpec { counts: [1, 5], ..SyntheticSpec::default() };
        let d = generate_dataset::<f32>(&spec).unwrap();
        assert!(matches!(split_train_val(&d, 0.8, 1), Err(Error::Input(_))));
    }

    #[test]
    fn key_values_round_trip() {
        let spec = SyntheticSpec { counts: [3, 7], blob_delta: 0.2, seed: 99, ..SyntheticSpec::default() };
        assert_eq!(SyntheticSpec::from_key_values(&spec.to_key_values()).unwrap(), spec);
        assert!(matches!(SyntheticSpec::from_key_values("colour=red"), Err(Error::Config(_))));
        assert!(matches!(SyntheticSpec::from_key_values("side=big"), Err(Error::Config(_))));
    }
}
