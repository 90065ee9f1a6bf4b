//! On-disk corpus layout:
//!
//! ```text
//! images/NNNN.pgm   one [1, H, W] image per id
//! masks/NNNN.pgm    brain mask (0 or 1) per id, optional
//! labels.csv        id,label
//! spec.txt          key=value dump of the generating SyntheticSpec
//! ```

use std::path::{Path, PathBuf};

use crate::datagen::{Dataset, Mask, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::pgm::{load_pgm, save_pgm};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn image_path(dir: &Path, id: usize) -> PathBuf {
    dir.join("images").join(format!("{id:04}.pgm"))
}

pub fn mask_path(dir: &Path, id: usize) -> PathBuf {
    dir.join("masks").join(format!("{id:04}.pgm"))
}

pub fn labels_csv<T: Scalar>(dataset: &Dataset<T>) -> String {
    let mut out = String::from("id,label\n");
    for (id, label) in dataset.ids.iter().zip(&dataset.labels) {
        out.push_str(&format!("{id},{label}\n"));
    }
    out
}

/// Writes the corpus under `dir`. `spec` is recorded when given.
pub fn save_corpus<T: Scalar>(dir: &Path, dataset: &Dataset<T>, spec: Option<&SyntheticSpec>) -> Result<()> {
    for (i, &id) in dataset.ids.iter().enumerate() {
        save_pgm(&image_path(dir, id), &dataset.images[i])?;
        if let Some(mask) = dataset.masks.get(i) {
            let plane = Tensor::<f32>::from_fn(vec![mask.height(), mask.width()], |k| f32::from(u8::from(mask.bits()[k])));
            save_pgm(&mask_path(dir, id), &plane)?;
        }
    }
    if let Some(spec) = spec {
        fsutil::write_atomic(&dir.join("spec.txt"), spec.to_key_values().as_bytes())?;
    }
    fsutil::write_atomic(&dir.join("labels.csv"), labels_csv(dataset).as_bytes())
}

fn parse_labels(text: &str, path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("id,label") {
        return Err(Error::Input(format!("{}: expected header id,label", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let bad = || Error::Input(format!("{}: malformed row {}: {line:?}", path.display(), n + 2));
            let (id, label) = line.split_once(',').ok_or_else(bad)?;
            Ok((id.trim().parse().map_err(|_| bad())?, label.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Reads a corpus written by [`save_corpus`]. Masks are loaded when every image has one.
pub fn load_corpus<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    let labels_path = dir.join("labels.csv");
    let text = String::from_utf8(fsutil::read(&labels_path)?)
        .map_err(|_| Error::Input(format!("{} is not UTF-8", labels_path.display())))?;
    let rows = parse_labels(&text, &labels_path)?;
    let mut images = Vec::with_capacity(rows.len());
    for &(id, _) in &rows {
        let plane: Tensor<T> = load_pgm(&image_path(dir, id))?;
        let (h, w) = (plane.shape()[0], plane.shape()[1]);
        images.push(plane.reshape(vec![1, h, w])?);
    }
    let mut masks = Vec::new();
    if rows.iter().all(|&(id, _)| mask_path(dir, id).is_file()) {
        for &(id, _) in &rows {
            let plane: Tensor<f32> = load_pgm(&mask_path(dir, id))?;
            let bits = plane.data().iter().map(|&v| v > 0.5).collect();
            masks.push(Mask::new(plane.shape()[0], plane.shape()[1], bits)?);
        }
    }
    let (ids, labels) = rows.into_iter().unzip();
    Dataset::new(images, labels, ids, masks)
}

/// The recorded spec, if the corpus has one.
pub fn load_spec(dir: &Path) -> Result<Option<SyntheticSpec>> {
    let path = dir.join("spec.txt");
    if !path.is_file() {
        return Ok(None);
    }
    let text = String::from_utf8(fsutil::read(&path)?).map_err(|_| Error::Input(format!("{} is not UTF-8", path.display())))?;
    SyntheticSpec::from_key_values(&text).map(Some)
}
