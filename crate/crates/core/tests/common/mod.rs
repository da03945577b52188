//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use idforge_core::{EmbeddingMatrix, Matrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Textbook LOF: `N_k(p) = {o != p : d(p, o) <= k-distance(p)}`, density
/// `1 / (mean reach-dist + 1e-10)`.
pub fn lof_reference(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let m = points.len();
    let kdist: Vec<f64> = (0..m)
        .map(|p| {
            let mut ds: Vec<f64> = (0..m).filter(|&o| o != p).map(|o| dist(&points[p], &points[o])).collect();
            ds.sort_by(f64::total_cmp);
            ds[k - 1]
        })
        .collect();
    let hood =
        |p: usize| -> Vec<usize> { (0..m).filter(|&o| o != p && dist(&points[p], &points[o]) <= kdist[p]).collect() };
    let lrd: Vec<f64> = (0..m)
        .map(|p| {
            let n = hood(p);
            let total: f64 = n.iter().map(|&o| kdist[o].max(dist(&points[p], &points[o]))).sum();
            1.0 / (total / n.len() as f64 + 1e-10)
        })
        .collect();
    (0..m)
        .map(|p| {
            let n = hood(p);
            n.iter().map(|&o| lrd[o]).sum::<f64>() / n.len() as f64 / lrd[p]
        })
        .collect()
}

/// DBSCAN by components of the core-point graph. Clusters are numbered by
/// their smallest core index; a border point takes the smallest cluster among
/// its core neighbours.
pub fn dbscan_reference(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let m = points.len();
    let near = |a: usize, b: usize| dist(&points[a], &points[b]) <= eps;
    let core: Vec<bool> = (0..m).map(|p| (0..m).filter(|&o| near(p, o)).count() >= min_pts).collect();
    // union-find over core points
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for a in 0..m {
        for b in a + 1..m {
            if core[a] && core[b] && near(a, b) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut cluster_of_root = std::collections::BTreeMap::new();
    let mut labels = vec![None; m];
    for p in 0..m {
        if core[p] {
            let r = find(&mut parent, p);
            let next = cluster_of_root.len();
            labels[p] = Some(*cluster_of_root.entry(r).or_insert(next));
        }
    }
    for p in 0..m {
        if !core[p] {
            labels[p] = (0..m).filter(|&o| core[o] && near(p, o)).filter_map(|o| labels[o]).min();
        }
    }
    labels
}

/// Singular values as square roots of the eigenvalues of the smaller Gram matrix.
pub fn eigen_singular_values(a: &Matrix) -> Vec<f64> {
    let dm = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    let gram = if a.rows() >= a.cols() { dm.transpose() * &dm } else { &dm * dm.transpose() };
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Random points, half the time on a coarse lattice so exact distance ties occur.
pub fn random_points(seed: u64, max_m: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(6..=max_m);
    let d = rng.random_range(1..=4usize);
    let lattice = rng.random_bool(0.5);
    let clusters = rng.random_range(1..=3usize);
    let centres: Vec<Vec<f64>> =
        (0..clusters).map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    (0..m)
        .map(|_| {
            let c = &centres[rng.random_range(0..clusters)];
            c.iter()
                .map(|&x| {
                    if lattice {
                        x.round() + rng.random_range(-2..=2) as f64
                    } else {
                        x + rng.random_range(-2.0..2.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn to_embeddings(points: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(points).unwrap()
}
