use std::collections::VecDeque;

use crate::diffusion::LatentGrid;
use crate::error::{Error, Result};

use super::{Mask, MaskSet};

/// Proposes character regions in an image, ordered by character.
pub trait Segmenter {
    fn segment(&self, image: &LatentGrid, num_characters: usize) -> Result<Vec<Mask>>;
}

/// Thresholds at `mean + std_factor · std`, takes 4-connected components,
/// keeps the largest ones and orders them left to right by centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSegmenter {
    pub std_factor: f64,
}

impl Default for ThresholdSegmenter {
    fn default() -> Self {
        Self { std_factor: 0.5 }
    }
}

impl Segmenter for ThresholdSegmenter {
    fn segment(&self, image: &LatentGrid, num_characters: usize) -> Result<Vec<Mask>> {
        let n = image.len() as f64;
        let mean = image.values().iter().sum::<f64>() / n;
        let var = image.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let threshold = mean + self.std_factor * var.sqrt();
        let side = image.side();
        // a constant image has every pixel "at" the threshold; treat it as covered
        let flat = image.values().iter().all(|&v| v == image.values()[0]);
        let above = Mask::from_fn(side, |x, y| flat || image.at(x, y) > threshold);

        let mut components = connected_components(&above);
        // largest first; stable sort keeps scan order among equal areas
        components.sort_by(|a, b| b.len().cmp(&a.len()));
        components.truncate(num_characters);
        let centroid = |c: &Vec<usize>| {
            let (sx, sy) = c.iter().fold((0.0, 0.0), |(sx, sy), &p| (sx + (p % side) as f64, sy + (p / side) as f64));
            (sx / c.len() as f64, sy / c.len() as f64)
        };
        components.sort_by(|a, b| {
            let (ax, ay) = centroid(a);
            let (bx, by) = centroid(b);
            ax.total_cmp(&bx).then(ay.total_cmp(&by))
        });
        Ok(components
            .into_iter()
            .map(|pixels| {
                let mut bits = vec![false; side * side];
                pixels.into_iter().for_each(|p| bits[p] = true);
                Mask::new(side, bits).expect("sized")
            })
            .collect())
    }
}

/// 4-connected components of the set pixels, as pixel-index lists in the
/// scan order of each component's first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Vec<usize>> {
    let side = mask.side();
    let mut seen = vec![false; side * side];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..side * side {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            let (x, y) = (p % side, p / side);
            let mut visit = |q: usize| {
                if !seen[q] && mask.bits()[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < side {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - side);
            }
            if y + 1 < side {
                visit(p + side);
            }
        }
        pixels.sort_unstable();
        out.push(pixels);
    }
    out
}

/// Character masks for a template image plus the complementary background.
pub fn extract_masks(template: &LatentGrid, num_characters: usize, segmenter: &dyn Segmenter) -> Result<MaskSet> {
    let side = template.side();
    if num_characters == 0 {
        return Ok(MaskSet::empty(side));
    }
    let masks = segmenter.segment(template, num_characters)?;
    if masks.len() < num_characters {
        return Err(Error::Layout(format!(
            "found {} character region(s) but the prompt needs {num_characters} (short by {})",
            masks.len(),
            num_characters - masks.len()
        )));
    }
    MaskSet::from_characters(side, masks.into_iter().take(num_characters).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs() -> LatentGrid {
        LatentGrid::from_fn(20, |x, y| {
            let left = (3..7).contains(&x) && (8..12).contains(&y);
            let right = (12..18).contains(&x) && (5..10).contains(&y);
            if left || right {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn zero_characters_gives_full_background() {
        let set = extract_masks(&two_blobs(), 0, &ThresholdSegmenter::default()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.background(), &Mask::full(20));
    }

    #[test]
    fn two_blobs_two_masks_left_to_right() {
        let set = extract_masks(&two_blobs(), 2, &ThresholdSegmenter::default()).unwrap();
        assert_eq!(set.characters()[0], Mask::from_fn(20, |x, y| (3..7).contains(&x) && (8..12).contains(&y)));
        assert_eq!(set.characters()[1], Mask::from_fn(20, |x, y| (12..18).contains(&x) && (5..10).contains(&y)));
        assert!(set.is_partition());
    }

    #[test]
    fn largest_component_wins() {
        let set = extract_masks(&two_blobs(), 1, &ThresholdSegmenter::default()).unwrap();
        assert_eq!(set.characters()[0].count(), 30);
    }

    #[test]
    fn shortfall_is_a_layout_error() {
        let err = extract_masks(&two_blobs(), 3, &ThresholdSegmenter::default()).unwrap_err();
        assert!(matches!(err, Error::Layout(ref msg) if msg.contains("short by 1")));
    }

    #[test]
    fn uniform_image_is_one_character() {
        let flat = LatentGrid::from_fn(6, |_, _| 0.4);
        let set = extract_masks(&flat, 1, &ThresholdSegmenter::default()).unwrap();
        assert_eq!(set.characters()[0], Mask::full(6));
        assert_eq!(set.background(), &Mask::empty(6));
    }

    #[test]
    fn components_are_four_connected() {
        let diag = Mask::from_fn(3, |x, y| x == y);
        assert_eq!(connected_components(&diag).len(), 3);
        let cross = Mask::from_fn(3, |x, y| x == 1 || y == 1);
        assert_eq!(connected_components(&cross).len(), 1);
    }
}
