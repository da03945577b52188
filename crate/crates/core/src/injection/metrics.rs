use crate::diffusion::LatentGrid;
use crate::error::{ensure, Result};

use super::Mask;

/// Pearson correlation; zero when either input has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

fn check(a: &LatentGrid, b: &LatentGrid, mask: &Mask) -> Result<()> {
    a.check_same_shape(b)?;
    ensure!(mask.side() == a.side(), Dimension, "mask side {} does not match grid side {}", mask.side(), a.side());
    Ok(())
}

/// Pearson correlation restricted to the cells under `mask`.
pub fn masked_pearson(a: &LatentGrid, b: &LatentGrid, mask: &Mask) -> Result<f64> {
    check(a, b, mask)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        a.values().iter().zip(b.values()).zip(mask.bits()).filter(|(_, &m)| m).map(|((x, y), _)| (*x, *y)).unzip();
    Ok(pearson(&xs, &ys))
}

/// Mean absolute difference over the cells under `mask`; zero for an empty mask.
pub fn background_deviation(output: &LatentGrid, reference: &LatentGrid, mask: &Mask) -> Result<f64> {
    check(output, reference, mask)?;
    let (sum, n) = output
        .values()
        .iter()
        .zip(reference.values())
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((a, b), _)| (s + (a - b).abs(), n + 1));
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Largest absolute difference between 4-adjacent cells on opposite sides of
/// the mask boundary; zero when the mask has no boundary.
pub fn boundary_discontinuity(latent: &LatentGrid, mask: &Mask) -> Result<f64> {
    ensure!(
        mask.side() == latent.side(),
        Dimension,
        "mask side {} does not match grid side {}",
        mask.side(),
        latent.side()
    );
    let n = latent.side();
    let mut worst: f64 = 0.0;
    for y in 0..n {
        for x in 0..n {
            if x + 1 < n && mask.at(x, y) != mask.at(x + 1, y) {
                worst = worst.max((latent.at(x, y) - latent.at(x + 1, y)).abs());
            }
            if y + 1 < n && mask.at(x, y) != mask.at(x, y + 1) {
                worst = worst.max((latent.at(x, y) - latent.at(x, y + 1)).abs());
            }
        }
    }
    Ok(worst)
}
