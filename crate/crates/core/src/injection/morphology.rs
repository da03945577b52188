use crate::error::{ensure, Error, Result};

use super::Mask;

/// Binary dilation by a square structuring element of side `2·⌊kernel/2⌋ + 1`.
///
/// Kernels 0 and 1 leave the mask unchanged. Runs in time linear in the pixel
/// count regardless of kernel size (separable passes over prefix counts).
pub fn dilate(mask: &Mask, kernel: usize) -> Mask {
    let half = kernel / 2;
    if half == 0 {
        return mask.clone();
    }
    let n = mask.side();
    let horizontal = sweep(mask.bits(), n, half, |line, i| line * n + i);
    let bits = sweep(&horizontal, n, half, |line, i| i * n + line);
    Mask::new(n, bits).expect("same shape")
}

/// For every line of the grid (rows or columns, chosen by `index`), marks each
/// position whose window of radius `half` contains a set bit.
fn sweep(src: &[bool], n: usize, half: usize, index: impl Fn(usize, usize) -> usize) -> Vec<bool> {
    let mut out = vec![false; n * n];
    let mut prefix = vec![0usize; n + 1];
    for line in 0..n {
        for i in 0..n {
            prefix[i + 1] = prefix[i] + usize::from(src[index(line, i)]);
        }
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            out[index(line, i)] = prefix[hi + 1] > prefix[lo];
        }
    }
    out
}

/// Dilation kernel for re-denoising level `i` when starting at `t_prime`:
/// `round((t_prime - i) / t_prime · k_max)`, growing from 0 at the start to
/// `k_max` at level 0.
pub fn kernel_schedule(i: usize, t_prime: usize, k_max: usize) -> Result<usize> {
    if t_prime == 0 {
        return if i == 0 { Ok(k_max) } else { Err(Error::Config(format!("level {i} is past a start level of 0"))) };
    }
    ensure!(i <= t_prime, Config, "level {i} exceeds start level {t_prime}");
    Ok((((t_prime - i) as f64 / t_prime as f64) * k_max as f64).round() as usize)
}

/// Block-majority downsampling: an output cell is set when at least half of
/// its block is set.
pub fn downsample_mask(mask: &Mask, latent_side: usize) -> Result<Mask> {
    let side = mask.side();
    ensure!(
        latent_side >= 1 && side % latent_side == 0,
        Dimension,
        "mask side {side} is not a multiple of latent side {latent_side}"
    );
    let block = side / latent_side;
    let area = block * block;
    Ok(Mask::from_fn(latent_side, |bx, by| {
        let mut count = 0;
        for y in by * block..(by + 1) * block {
            for x in bx * block..(bx + 1) * block {
                count += usize::from(mask.at(x, y));
            }
        }
        2 * count >= area
    }))
}
