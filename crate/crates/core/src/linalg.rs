//! Operator norms of sparse row maps.

use crate::model::LinearFunctional;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spectral norm `||M||_2` of the map whose rows are `rows`, by power
/// iteration on `M^T M` from a seeded random start.
pub fn operator_norm(rows: &[LinearFunctional], d: usize, tol: f64, max_iter: usize) -> f64 {
    if rows.is_empty() || d == 0 {
        return 0.0;
    }
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let mut sigma_sq = 0.0;
    let mut y = vec![0.0; rows.len()];
    for _ in 0..max_iter {
        for (yi, row) in y.iter_mut().zip(rows) {
            *yi = row.dot(&x);
        }
        let mut next = vec![0.0; d];
        for (row, &yi) in rows.iter().zip(&y) {
            row.axpy_into(yi, &mut next);
        }
        let nrm = normalize(&mut next);
        if nrm == 0.0 {
            return 0.0;
        }
        let done = (nrm - sigma_sq).abs() <= tol * nrm;
        sigma_sq = nrm;
        x = next;
        if done {
            break;
        }
    }
    sigma_sq.sqrt()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}
