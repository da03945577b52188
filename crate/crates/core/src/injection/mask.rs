use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

use super::morphology::downsample_mask;

/// A square binary mask; `true` marks a covered pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    side: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(side: usize, bits: Vec<bool>) -> Result<Self> {
        ensure!(side >= 1, Dimension, "mask side must be at least 1");
        ensure!(
            bits.len() == side * side,
            Dimension,
            "expected {} bits for side {side}, got {}",
            side * side,
            bits.len()
        );
        Ok(Self { side, bits })
    }

    pub fn empty(side: usize) -> Self {
        Self { side, bits: vec![false; side * side] }
    }

    pub fn full(side: usize) -> Self {
        Self { side, bits: vec![true; side * side] }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(side * side);
        for y in 0..side {
            for x in 0..side {
                bits.push(f(x, y));
            }
        }
        Self { side, bits }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.side + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Mask {
        Mask { side: self.side, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask { side: self.side, bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect() }
    }

    pub fn is_superset_of(&self, other: &Mask) -> bool {
        self.side == other.side && self.bits.iter().zip(&other.bits).all(|(a, b)| *a || !*b)
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }
}

/// Character masks plus the background, which is exactly the complement of
/// their union. Character masks are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    characters: Vec<Mask>,
    background: Mask,
}

impl MaskSet {
    /// Builds a set from possibly overlapping masks; a pixel claimed by several
    /// characters goes to the earliest one.
    pub fn from_characters(side: usize, masks: Vec<Mask>) -> Result<Self> {
        ensure!(masks.iter().all(|m| m.side == side), Dimension, "every character mask must have side {side}");
        let mut taken = vec![false; side * side];
        let characters = masks
            .into_iter()
            .map(|m| {
                let bits = m
                    .bits
                    .iter()
                    .zip(taken.iter_mut())
                    .map(|(&b, t)| {
                        let own = b && !*t;
                        *t |= b;
                        own
                    })
                    .collect();
                Mask { side, bits }
            })
            .collect();
        let background = Mask { side, bits: taken.into_iter().map(|t| !t).collect() };
        Ok(Self { characters, background })
    }

    pub fn empty(side: usize) -> Self {
        Self { characters: Vec::new(), background: Mask::full(side) }
    }

    pub fn side(&self) -> usize {
        self.background.side
    }

    pub fn characters(&self) -> &[Mask] {
        &self.characters
    }

    pub fn background(&self) -> &Mask {
        &self.background
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    /// Union of all character masks.
    pub fn foreground(&self) -> Mask {
        self.background.complement()
    }

    /// Block-majority downsampling of each character mask, re-partitioned:
    /// a cell claimed by several characters goes to the earliest, and the
    /// background is the complement of the downsampled characters.
    pub fn downsample(&self, latent_side: usize) -> Result<MaskSet> {
        if self.characters.is_empty() {
            // still validates divisibility
            downsample_mask(&self.background, latent_side)?;
            return Ok(MaskSet::empty(latent_side));
        }
        let small = self.characters.iter().map(|m| downsample_mask(m, latent_side)).collect::<Result<Vec<_>>>()?;
        MaskSet::from_characters(latent_side, small)
    }

    /// True when background plus character bits sum to exactly one per cell.
    pub fn is_partition(&self) -> bool {
        (0..self.side() * self.side()).all(|i| {
            let n = self.characters.iter().filter(|m| m.bits[i]).count() + usize::from(self.background.bits[i]);
            n == 1
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_background_is_full() {
        let set = MaskSet::from_characters(4, vec![]).unwrap();
        assert_eq!(set.background(), &Mask::full(4));
        assert!(set.is_partition());
    }

    #[test]
    fn overlaps_go_to_earlier_character() {
        let a = Mask::from_fn(4, |x, _| x < 3);
        let b = Mask::from_fn(4, |x, _| x >= 2);
        let set = MaskSet::from_characters(4, vec![a.clone(), b]).unwrap();
        assert_eq!(set.characters()[0], a);
        assert_eq!(set.characters()[1], Mask::from_fn(4, |x, _| x == 3));
        assert_eq!(set.background().count(), 0);
        assert!(set.is_partition());
    }

    #[test]
    fn background_is_complement_of_union() {
        let a = Mask::from_fn(6, |x, y| x < 2 && y < 2);
        let b = Mask::from_fn(6, |x, y| x > 3 && y > 3);
        let set = MaskSet::from_characters(6, vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(set.background(), &a.union(&b).complement());
    }

    #[test]
    fn downsampled_set_partitions() {
        // two characters each covering exactly half of the middle block
        let a = Mask::from_fn(4, |x, _| x == 1);
        let b = Mask::from_fn(4, |x, _| x == 2);
        let set = MaskSet::from_characters(4, vec![a, b]).unwrap();
        let small = set.downsample(2).unwrap();
        assert!(small.is_partition());
        assert_eq!(small.side(), 2);
    }
}
