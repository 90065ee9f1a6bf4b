//! Structural similarity between two relevance maps.
//!
//! Maps are min-max normalized to `[0, 1]` first, then compared window by
//! window with the luminance, contrast and structure terms of SSIM. The
//! score of a pair is `l·c·s` averaged over every valid 11×11 Gaussian
//! window.

use std::path::Path;

use rayon::prelude::*;

use crate::corruption::{corrupt_image, NoiseKind, NoiseParams};
use crate::error::{Error, Result};
use crate::explain::{Explainer, ExplainerKind, Target};
use crate::fsutil;
use crate::model::Network;
use crate::pgm;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConstants {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the compared maps.
    pub dynamic_range: f64,
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self { k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimConstants {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn c3(&self) -> f64 {
        self.c2() / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec {
    pub size: usize,
    pub sigma: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { size: 11, sigma: 1.5 }
    }
}

impl WindowSpec {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let centre = (self.size as f64 - 1.0) / 2.0;
        let raw: Vec<f64> =
            (0..self.size).map(|i| (-((i as f64 - centre).powi(2)) / (2.0 * self.sigma * self.sigma)).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// Row-major `size × size` weights summing to 1.
    pub fn weights(&self) -> Vec<f64> {
        let taps = self.taps();
        taps.iter().flat_map(|&a| taps.iter().map(move |&b| a * b)).collect()
    }
}

/// How windows are laid over the map pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Mean over all valid Gaussian windows.
    #[default]
    WindowedMean,
    /// One window spanning the whole map with uniform weights.
    WholeImage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RssaConfig {
    pub constants: SsimConstants,
    pub window: WindowSpec,
    pub aggregation: Aggregation,
}

/// A map rescaled into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMap {
    pub values: Tensor<f64>,
    /// Set when the input was constant and every value became 0.5.
    pub degenerate: bool,
}

/// `(R − min) / (max − min)`; constant maps become all 0.5 and are flagged.
pub fn normalize_map<T: Scalar>(map: &Tensor<T>) -> NormalizedMap {
    let (lo, hi) = map.min_max();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    let span = hi - lo;
    if !(span > 0.0) {
        return NormalizedMap { values: Tensor::full(map.shape().to_vec(), 0.5), degenerate: true };
    }
    NormalizedMap { values: map.cast::<f64>().map(|v| ((v - lo) / span).clamp(0.0, 1.0)), degenerate: false }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimTerms {
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

impl SsimTerms {
    pub fn product(&self) -> f64 {
        self.luminance * self.contrast * self.structure
    }

    fn from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, k: &SsimConstants) -> Self {
        let (vx, vy) = (vx.max(0.0), vy.max(0.0));
        let (sx, sy) = (vx.sqrt(), vy.sqrt());
        let (c1, c2, c3) = (k.c1(), k.c2(), k.c3());
        SsimTerms {
            luminance: (2.0 * mx * my + c1) / (mx * mx + my * my + c1),
            contrast: (2.0 * sx * sy + c2) / (vx + vy + c2),
            structure: (cxy + c3) / (sx * sy + c3),
        }
    }
}

/// Luminance, contrast and structure of two equally shaped patches under `weights`.
pub fn ssim_terms(x: &[f64], y: &[f64], weights: &[f64], k: &SsimConstants) -> Result<SsimTerms> {
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(Error::Input(format!(
            "patch sizes differ: {} vs {} with {} weights",
            x.len(),
            y.len(),
            weights.len()
        )));
    }
    let mx: f64 = x.iter().zip(weights).map(|(a, w)| a * w).sum();
    let my: f64 = y.iter().zip(weights).map(|(a, w)| a * w).sum();
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cxy = 0.0;
    for ((a, b), w) in x.iter().zip(y).zip(weights) {
        vx += w * (a - mx) * (a - mx);
        vy += w * (b - my) * (b - my);
        cxy += w * (a - mx) * (b - my);
    }
    Ok(SsimTerms::from_moments(mx, my, vx, vy, cxy, k))
}

/// Per-window `l·c·s` laid out spatially, `(H − size + 1) × (W − size + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RssaMap {
    pub values: Tensor<f64>,
    pub mean: f64,
    /// Either input was constant before normalization.
    pub degenerate: bool,
}

fn check_pair(a: &[usize], b: &[usize], window: usize) -> Result<(usize, usize)> {
    if a != b {
        return Err(Error::Input(format!("relevance maps differ in shape: {a:?} vs {b:?}")));
    }
    let &[h, w] = a else {
        return Err(Error::Input(format!("relevance maps must be 2-D, got shape {a:?}")));
    };
    if h < window || w < window {
        return Err(Error::Input(format!("{h}×{w} map is smaller than the {window}×{window} window")));
    }
    Ok((h, w))
}

/// Valid-region separable filtering of a row-major `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &plane[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = src[c..c + n].iter().zip(taps).map(|(v, t)| v * t).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for (k, t) in taps.iter().enumerate() {
            let src = &rows[(r + k) * ow..(r + k + 1) * ow];
            for (o, v) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += t * v;
            }
        }
    }
    out
}

/// Windowed RSSA map of two raw relevance maps.
pub fn rssa_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<RssaMap> {
    rssa_map_with(a, b, &RssaConfig::default())
}

pub fn rssa_map_with<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, config: &RssaConfig) -> Result<RssaMap> {
    let (h, w) = check_pair(a.shape(), b.shape(), config.window.size)?;
    let na = normalize_map(a);
    let nb = normalize_map(b);
    let (x, y) = (na.values.data(), nb.values.data());
    let taps = config.window.taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(x, h, w, &taps);
    let my = filter_valid(y, h, w, &taps);
    let exx = filter_valid(&xx, h, w, &taps);
    let eyy = filter_valid(&yy, h, w, &taps);
    let exy = filter_valid(&xy, h, w, &taps);
    let values: Vec<f64> = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            SsimTerms::from_moments(ux, uy, exx[i] - ux * ux, eyy[i] - uy * uy, exy[i] - ux * uy, &config.constants)
                .product()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let n = config.window.size;
    Ok(RssaMap {
        values: Tensor::new(vec![h - n + 1, w - n + 1], values)?,
        mean,
        degenerate: na.degenerate || nb.degenerate,
    })
}

/// RSSA of a pair of raw relevance maps (windowed mean of `l·c·s`).
pub fn rssa_global<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    rssa_global_with(a, b, &RssaConfig::default())
}

pub fn rssa_global_with<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, config: &RssaConfig) -> Result<f64> {
    match config.aggregation {
        Aggregation::WindowedMean => Ok(rssa_map_with(a, b, config)?.mean),
        Aggregation::WholeImage => {
            check_pair(a.shape(), b.shape(), 1)?;
            let na = normalize_map(a);
            let nb = normalize_map(b);
            let uniform = vec![1.0 / a.len() as f64; a.len()];
            Ok(ssim_terms(na.values.data(), nb.values.data(), &uniform, &config.constants)?.product())
        }
    }
}

/// Kinds × λ values to corrupt with, plus the master noise seed.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseGrid {
    pub kinds: Vec<NoiseKind>,
    pub lambdas: Vec<f64>,
    pub seed: u64,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        Self {
            kinds: vec![NoiseKind::Gaussian, NoiseKind::Rician, NoiseKind::ChiSquared],
            lambdas: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            seed: 1,
        }
    }
}

impl NoiseGrid {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.lambdas.is_empty() {
            return Err(Error::Config("noise grid needs at least one kind and one λ".into()));
        }
        for &lambda in &self.lambdas {
            NoiseParams::new(NoiseKind::Gaussian, lambda, 0).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Mean RSSA between clean-input and corrupted-input maps, `kinds × lambdas`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RssaMatrix {
    pub explainer: ExplainerKind,
    pub kinds: Vec<NoiseKind>,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

impl RssaMatrix {
    pub fn get(&self, kind: usize, lambda: usize) -> f64 {
        self.values[kind * self.lambdas.len() + lambda]
    }

    pub fn row(&self, kind: usize) -> &[f64] {
        let n = self.lambdas.len();
        &self.values[kind * n..(kind + 1) * n]
    }

    /// Entry for a kind and λ, matched exactly.
    pub fn lookup(&self, kind: NoiseKind, lambda: f64) -> Option<f64> {
        let r = self.kinds.iter().position(|&k| k == kind)?;
        let c = self.lambdas.iter().position(|&l| l == lambda)?;
        Some(self.get(r, c))
    }

    /// Header `kind,<λ…>`, one row per noise kind.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind");
        for l in &self.lambdas {
            out.push_str(&format!(",{l}"));
        }
        out.push('\n');
        for (r, kind) in self.kinds.iter().enumerate() {
            out.push_str(kind.name());
            for v in self.row(r) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the RSSA matrix of one explainer over `images`.
///
/// Each image is explained for the class the model predicts on its clean
/// version, and the corrupted version is explained for that same class.
/// Image `i` is corrupted with seed `grid.seed ^ i` in every cell.
pub fn rssa_matrix<T: Scalar>(
    explainer: &Explainer,
    net: &Network<'_, T>,
    images: &[Tensor<T>],
    grid: &NoiseGrid,
    config: &RssaConfig,
) -> Result<RssaMatrix> {
    if images.is_empty() {
        return Err(Error::Input("RSSA matrix needs at least one evaluation image".into()));
    }
    grid.validate()?;
    let cells: Vec<(NoiseKind, f64)> =
        grid.kinds.iter().flat_map(|&k| grid.lambdas.iter().map(move |&l| (k, l))).collect();

    let per_image: Vec<Vec<f64>> = images
        .par_iter()
        .enumerate()
        .map(|(i, image)| {
            let target = explainer.target().resolve(net, image)?;
            let fixed = explainer.clone().with_target(Target::Class(target));
            let clean = fixed.explain(net, image)?;
            cells
                .iter()
                .map(|&(kind, lambda)| {
                    let noisy = corrupt_image(image, &NoiseParams::new(kind, lambda, grid.seed ^ i as u64))?;
                    let map = fixed.explain(net, &noisy)?;
                    rssa_global_with(&clean.values, &map.values, config)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let values = (0..cells.len()).map(|c| per_image.iter().map(|row| row[c]).sum::<f64>() / images.len() as f64).collect();
    Ok(RssaMatrix { explainer: explainer.kind(), kinds: grid.kinds.clone(), lambdas: grid.lambdas.clone(), values })
}

/// Writes an RSSA map as a 16-bit PGM plus a `min,max,mean` sidecar CSV.
pub fn save_rssa_map(pgm_path: &Path, map: &RssaMap) -> Result<()> {
    let (lo, hi) = map.values.min_max();
    let span = hi - lo;
    let scaled = map.values.map(|v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 });
    pgm::save_pgm(pgm_path, &scaled)?;
    let sidecar = format!("min,max,mean\n{lo},{hi},{}\n", map.mean);
    fsutil::write_atomic(&pgm_path.with_extension("csv"), sidecar.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_map(h: usize, w: usize, salt: usize) -> Tensor<f64> {
        Tensor::from_fn(vec![h, w], |i| (((i + salt) * 2654435761usize) % 9973) as f64 / 9973.0)
    }

    #[test]
    fn constants() {
        let k = SsimConstants::default();
        assert!((k.c1() - 1e-4).abs() < 1e-18);
        assert!((k.c2() - 9e-4).abs() < 1e-18);
        assert!((k.c3() - 4.5e-4).abs() < 1e-18);
    }

    #[test]
    fn window_weights_sum_to_one() {
        let w = WindowSpec::default().weights();
        assert_eq!(w.len(), 121);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[60] > w[0]);
    }

    #[test]
    fn normalization_cases() {
        let unit = Tensor::<f64>::from_f64(vec![2, 2], &[0.0, 0.25, 0.5, 1.0]).unwrap();
        assert_eq!(normalize_map(&unit).values, unit);
        let flat = normalize_map(&Tensor::full(vec![3, 3], 7.0));
        assert!(flat.degenerate);
        assert!(flat.values.data().iter().all(|&v| v == 0.5));
        let sym = normalize_map(&Tensor::<f64>::from_f64(vec![3], &[-2.0, 0.0, 2.0]).unwrap());
        assert_eq!(sym.values.data()[1], 0.5);
    }

    #[test]
    fn identical_patches_give_unit_terms() {
        let x: Vec<f64> = (0..121).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let w = WindowSpec::default().weights();
        let t = ssim_terms(&x, &x, &w, &SsimConstants::default()).unwrap();
        for v in [t.luminance, t.contrast, t.structure] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_patches_closed_form() {
        let w = WindowSpec::default().weights();
        let k = SsimConstants::default();
        let t = ssim_terms(&[1.0; 121], &[0.0; 121], &w, &k).unwrap();
        assert!((t.luminance - k.c1() / (1.0 + k.c1())).abs() < 1e-15);
        assert!((t.luminance - 9.999e-5).abs() < 1e-8);
        assert!((t.contrast - 1.0).abs() < 1e-15);
        assert!((t.structure - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_similarity_and_shape() {
        let a = noise_map(64, 64, 3);
        let m = rssa_map(&a, &a).unwrap();
        assert_eq!(m.values.shape(), &[54, 54]);
        assert!(m.values.data().iter().all(|&v| (v - 1.0).abs() < 1e-9));
        assert!((rssa_global(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_pair_is_flagged_but_scored() {
        let a = Tensor::<f64>::zeros(vec![16, 16]);
        let m = rssa_map(&a, &noise_map(16, 16, 0)).unwrap();
        assert!(m.degenerate);
        assert!(m.mean.is_finite());
        assert!((rssa_global(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whole_image_variant() {
        let a = noise_map(20, 20, 1);
        let b = noise_map(20, 20, 2);
        let cfg = RssaConfig { aggregation: Aggregation::WholeImage, ..RssaConfig::default() };
        assert!((rssa_global_with(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-12);
        let ab = rssa_global_with(&a, &b, &cfg).unwrap();
        assert!((ab - rssa_global_with(&b, &a, &cfg).unwrap()).abs() < 1e-12);
        assert!(ab < 1.0);
    }

    #[test]
    fn shape_errors() {
        let a = noise_map(16, 16, 0);
        assert!(matches!(rssa_global(&a, &noise_map(16, 17, 0)), Err(Error::Input(_))));
        assert!(matches!(rssa_map(&noise_map(10, 30, 0), &noise_map(10, 30, 1)), Err(Error::Input(_))));
        let flat = Tensor::<f64>::zeros(vec![256]);
        assert!(rssa_global(&flat, &flat).is_err());
    }

    #[test]
    fn matrix_csv_layout() {
        let m = RssaMatrix {
            explainer: ExplainerKind::Lrp,
            kinds: vec![NoiseKind::Gaussian, NoiseKind::Rician],
            lambdas: vec![0.0, 0.1],
            values: vec![1.0, 0.5, 1.0, 0.25],
        };
        assert_eq!(m.to_csv(), "kind,0,0.1\ngaussian,1,0.5\nrician,1,0.25\n");
        assert_eq!(m.lookup(NoiseKind::Rician, 0.1), Some(0.25));
        assert_eq!(m.lookup(NoiseKind::ChiSquared, 0.1), None);
    }
}
