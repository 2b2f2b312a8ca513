//! Exact integer solving of square linear systems by fraction-free
//! (Bareiss) elimination.

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// The `s x s` generalized Vandermonde matrix with rows `(a, a^2, ..., a^s)`.
pub fn generalized_vandermonde(roots: &[BigInt]) -> Vec<Vec<BigInt>> {
    roots
        .iter()
        .map(|a| {
            let mut row = Vec::with_capacity(roots.len());
            let mut p = a.clone();
            for _ in 0..roots.len() {
                row.push(p.clone());
                p *= a;
            }
            row
        })
        .collect()
}

/// Solves `A x = det(A) b` over the integers.
///
/// Returns `(det(A), x)`; by Cramer's rule `x = adj(A) b` is integral. Returns
/// `None` when `A` is singular. Runs in `O(s^3)` big-integer operations.
pub fn solve_scaled(matrix: Vec<Vec<BigInt>>, rhs: Vec<BigInt>) -> Option<(BigInt, Vec<BigInt>)> {
    let n = matrix.len();
    assert_eq!(rhs.len(), n, "right-hand side length");
    if n == 0 {
        return Some((BigInt::one(), Vec::new()));
    }
    let mut m: Vec<Vec<BigInt>> = matrix
        .into_iter()
        .zip(rhs)
        .map(|(mut row, b)| {
            assert_eq!(row.len(), n, "matrix must be square");
            row.push(b);
            row
        })
        .collect();

    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let swap = (k + 1..n).find(|&i| !m[i][k].is_zero())?;
            m.swap(k, swap);
            negate = !negate;
        }
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for row in rest.iter_mut() {
            let factor = std::mem::take(&mut row[k]);
            for j in k + 1..=n {
                let v = &row[j] * &pivot_row[k] - &factor * &pivot_row[j];
                row[j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }

    let det_u = m[n - 1][n - 1].clone();
    let det = if negate { -det_u.clone() } else { det_u };

    // Back substitution on U x = det * b', exact at every step.
    let mut x = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &det * &m[i][n];
        for j in i + 1..n {
            acc -= &m[i][j] * &x[j];
        }
        x[i] = acc / &m[i][i];
    }
    Some((det, x))
}
