//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! One-sided Jacobi orthogonalises the columns of the working matrix pairwise
//! until every pair is orthogonal to within a relative tolerance. It is slow
//! for large inputs but very accurate for the small matrices this crate
//! decomposes, including the small singular values.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Sweep cap before the decomposition is declared non-convergent.
pub const MAX_SWEEPS: usize = 1000;
/// A column pair counts as orthogonal once `|<a,b>| <= TOL * |a| |b|`.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Factors of `A = U · diag(σ) · Vᵀ` with `q = min(rows, cols)` components.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `rows × q`, orthonormal columns.
    pub u: Matrix,
    /// Nonincreasing, nonnegative, length `q`.
    pub singular_values: Vec<f64>,
    /// `cols × q`, orthonormal columns holding the right singular vectors.
    pub v: Matrix,
}

impl SvdFactors {
    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (m, q) = self.u.shape();
        let n = self.v.rows();
        Matrix::from_fn(m, n, |i, j| {
            (0..q).map(|c| self.u.get(i, c) * self.singular_values[c] * self.v.get(j, c)).sum()
        })
    }
}

/// Computes the thin SVD of a nonempty matrix.
///
/// Right singular vectors follow a fixed sign convention: the first entry of
/// each column of `v` with magnitude above `1e-12` is positive.
pub fn thin_svd(a: &Matrix) -> Result<SvdFactors> {
    if a.is_empty() {
        return Err(Error::Dimension(format!("SVD of an empty {}x{} matrix", a.rows(), a.cols())));
    }
    let (mut u, sigma, mut v) = if a.rows() >= a.cols() {
        jacobi_tall(a)?
    } else {
        // A = (Aᵀ)ᵀ = (U' Σ V'ᵀ)ᵀ = V' Σ U'ᵀ
        let (u_t, sigma, v_t) = jacobi_tall(&a.transpose())?;
        (v_t, sigma, u_t)
    };

    for c in 0..sigma.len() {
        let col = v.column(c);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
        if lead < 0.0 {
            negate_column(&mut v, c);
            negate_column(&mut u, c);
        }
    }
    Ok(SvdFactors { u, singular_values: sigma, v })
}

/// Jacobi SVD for `rows >= cols`; returns `(U rows×n, σ, V n×n)`.
fn jacobi_tall(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // columns below this squared norm are rounding noise and never rotated
    let frob2: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible_sq = (f64::EPSILON * f64::EPSILON) * frob2;
    let mut converged = n < 2;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha <= negligible_sq
                    || beta <= negligible_sq
                    || gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("Jacobi SVD did not converge within {MAX_SWEEPS} sweeps")));
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal singular values keep their column order
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma_max = norms[order[0]];
    let negligible = sigma_max * 1e-13 * (m.max(n) as f64);
    let mut ucols: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            let s = norms[j];
            (s > negligible && s > 0.0).then(|| cols[j].iter().map(|x| x / s).collect())
        })
        .collect();
    complete_orthonormal(&mut ucols, m);

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Matrix::from_fn(m, n, |i, c| ucols[c].as_ref().expect("completed")[i]);
    let v = Matrix::from_fn(n, n, |i, c| vcols[order[c]][i]);
    Ok((u, sigma, v))
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Fills `None` slots with unit vectors orthogonal to every other slot, drawing
/// candidates from the standard basis in order.
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], dim: usize) {
    let mut next_basis = 0;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        while next_basis < dim {
            let mut cand = vec![0.0; dim];
            cand[next_basis] = 1.0;
            next_basis += 1;
            // two Gram-Schmidt passes
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let proj = dot(&cand, other);
                    cand.iter_mut().zip(other).for_each(|(c, o)| *c -= proj * o);
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 0.5 {
                cand.iter_mut().for_each(|c| *c /= norm);
                cols[slot] = Some(cand);
                break;
            }
        }
    }
}

fn negate_column(m: &mut Matrix, c: usize) {
    for i in 0..m.rows() {
        let v = m.get(i, c);
        m.set(i, c, -v);
    }
}
