use crate::datagen::Mask;
use crate::error::{Error, Result};
use crate::explain::RelevanceMap;
use crate::scalar::Scalar;

/// Share of absolute relevance inside a region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionFraction {
    pub fraction: f64,
    /// The map carried no relevance at all; `fraction` is then 0.
    pub degenerate: bool,
}

/// `Σ|R| inside mask ÷ Σ|R|`.
pub fn region_relevance_fraction<T: Scalar>(map: &RelevanceMap<T>, mask: &Mask) -> Result<RegionFraction> {
    if [mask.height(), mask.width()] != [map.height(), map.width()] {
        return Err(Error::Input(format!(
            "mask is {}×{}, relevance map is {}×{}",
            mask.height(),
            mask.width(),
            map.height(),
            map.width()
        )));
    }
    let mut inside = 0.0;
    let mut total = 0.0;
    for (&r, &m) in map.values.data().iter().zip(mask.bits()) {
        let a = r.as_f64().abs();
        total += a;
        if m {
            inside += a;
        }
    }
    if total == 0.0 {
        return Ok(RegionFraction { fraction: 0.0, degenerate: true });
    }
    Ok(RegionFraction { fraction: (inside / total).clamp(0.0, 1.0), degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::ExplainerKind;
    use crate::tensor::Tensor;

    fn map(values: Tensor<f64>) -> RelevanceMap<f64> {
        RelevanceMap { values, explainer: ExplainerKind::Lrp, target: 0, source: String::new() }
    }

    #[test]
    fn whole_and_empty_regions() {
        let m = map(Tensor::from_fn(vec![4, 4], |i| i as f64 - 5.0));
        assert_eq!(region_relevance_fraction(&m, &Mask::full(4, 4)).unwrap().fraction, 1.0);
        assert_eq!(region_relevance_fraction(&m, &Mask::empty(4, 4)).unwrap().fraction, 0.0);
    }

    #[test]
    fn relevance_only_on_footprint() {
        let fp = Mask::from_fn(6, 6, |r, c| r < 2 && c < 3);
        let m = map(Tensor::from_fn(vec![6, 6], |i| if fp.bits()[i] { -0.5 } else { 0.0 }));
        assert_eq!(region_relevance_fraction(&m, &fp).unwrap().fraction, 1.0);
    }

    #[test]
    fn zero_map_is_flagged() {
        let r = region_relevance_fraction(&map(Tensor::zeros(vec![3, 3])), &Mask::full(3, 3)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.fraction, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(region_relevance_fraction(&map(Tensor::zeros(vec![3, 3])), &Mask::full(4, 3)).is_err());
    }
}
