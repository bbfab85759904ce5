use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Gauss–Hermite nodes and weights for `int e^{-x^2} f(x) dx`, sorted by node.
///
/// Golub–Welsch: the nodes are the eigenvalues of the symmetric tridiagonal
/// Jacobi matrix of the Hermite recurrence (off-diagonal `sqrt(k/2)`), and
/// each weight is `sqrt(pi)` times the squared first eigenvector component.
pub fn gauss_hermite(n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::Parameter("Gauss-Hermite rule needs at least one node".into()));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], sqrt_pi * v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rule)
}
