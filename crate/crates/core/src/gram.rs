//! Minimum-norm solutions of symmetric positive semidefinite systems.
//!
//! The projection solver reduces to a Gram system G c = b where G is
//! symmetric PSD and, for redundant bases, rank deficient. A diagonally
//! pivoted Cholesky factorization determines the numerical rank against a
//! relative tolerance; consistent rank-deficient systems get the solution
//! of smallest Euclidean norm, obtained by projecting a basic solution onto
//! the range of G (solutions differ by null-space vectors, and the range is
//! the orthogonal complement of the null space for symmetric G).

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Rank tolerance relative to the largest diagonal entry of the matrix.
pub const RANK_TOL: f64 = 1e-12;

/// Solution of a PSD system together with the numerical rank found.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub coefficients: Vec<f64>,
    pub rank: usize,
}

/// Solves the consistent PSD system `matrix * c = rhs` (row-major `n` by
/// `n`), returning the minimum-norm solution when the matrix is singular.
pub fn min_norm_spd_solve(matrix: &[f64], n: usize, rhs: &[f64], rank_tol: f64) -> Result<SpdSolution> {
    if matrix.len() != n * n || rhs.len() != n {
        return Err(Error::GramSolveFailed {
            reason: format!(
                "shape mismatch: {} entries and {} right-hand sides for n = {n}",
                matrix.len(),
                rhs.len()
            ),
        });
    }
    if n == 0 {
        return Ok(SpdSolution {
            coefficients: Vec::new(),
            rank: 0,
        });
    }

    let mut a = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    let threshold = rank_tol * max_diag;

    let mut rank = 0;
    for k in 0..n {
        // Diagonal pivoting: bring the largest remaining diagonal entry up.
        let (pivot, pivot_value) = (k..n)
            .map(|i| (i, a[i * n + i]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("k < n");
        if pivot_value <= threshold || pivot_value <= 0.0 {
            break;
        }
        swap_symmetric(&mut a, n, k, pivot);
        perm.swap(k, pivot);

        let d = a[k * n + k].sqrt();
        a[k * n + k] = d;
        for i in (k + 1)..n {
            a[i * n + k] /= d;
        }
        // Update the full trailing block, not just its lower triangle:
        // later pivot swaps exchange whole rows and columns, so stale
        // upper entries would leak into the factor.
        for j in (k + 1)..n {
            let ljk = a[j * n + k];
            for i in (k + 1)..n {
                a[i * n + j] -= a[i * n + k] * ljk;
            }
        }
        rank += 1;
    }

    // Basic solution: solve on the pivot set, zero elsewhere. For a
    // consistent system the remaining rows are linear combinations of the
    // pivot rows, so they are satisfied automatically.
    let mut y = vec![0.0; rank];
    for i in 0..rank {
        let mut acc = CompensatedSum::new();
        acc.add(rhs[perm[i]]);
        for j in 0..i {
            acc.add(-(a[i * n + j] * y[j]));
        }
        y[i] = acc.value() / a[i * n + i];
    }
    let mut z = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut acc = CompensatedSum::new();
        acc.add(y[i]);
        for j in (i + 1)..rank {
            acc.add(-(a[j * n + i] * z[j]));
        }
        z[i] = acc.value() / a[i * n + i];
    }
    let mut basic = vec![0.0; n];
    for i in 0..rank {
        basic[perm[i]] = z[i];
    }
    if rank == n {
        return Ok(SpdSolution {
            coefficients: basic,
            rank,
        });
    }

    // Minimum-norm solution: project the basic solution onto range(G),
    // spanned by the pivot columns of the original matrix.
    let pivots = &perm[..rank];
    let mut normal = vec![0.0; rank * rank];
    let mut target = vec![0.0; rank];
    for (s, &ps) in pivots.iter().enumerate() {
        for (t, &pt) in pivots.iter().enumerate().skip(s) {
            let mut acc = CompensatedSum::new();
            for i in 0..n {
                acc.add(matrix[i * n + ps] * matrix[i * n + pt]);
            }
            normal[s * rank + t] = acc.value();
            normal[t * rank + s] = normal[s * rank + t];
        }
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            acc.add(matrix[i * n + ps] * basic[i]);
        }
        target[s] = acc.value();
    }
    let weights = plain_cholesky_solve(&normal, rank, &target)?;
    let mut coefficients = vec![0.0; n];
    for (i, c) in coefficients.iter_mut().enumerate() {
        let mut acc = CompensatedSum::new();
        for (s, &ps) in pivots.iter().enumerate() {
            acc.add(matrix[i * n + ps] * weights[s]);
        }
        *c = acc.value();
    }
    Ok(SpdSolution { coefficients, rank })
}

fn swap_symmetric(a: &mut [f64], n: usize, i: usize, j: usize) {
    if i == j {
        return;
    }
    for col in 0..n {
        a.swap(i * n + col, j * n + col);
    }
    for row in 0..n {
        a.swap(row * n + i, row * n + j);
    }
}

/// Unpivoted Cholesky solve for a small SPD normal matrix. The pivot
/// columns passed in are linearly independent, so a vanishing diagonal
/// here indicates a genuinely broken input.
fn plain_cholesky_solve(matrix: &[f64], n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut l = matrix.to_vec();
    for k in 0..n {
        for j in 0..k {
            let ljk = l[k * n + j];
            for i in k..n {
                l[i * n + k] -= l[i * n + j] * ljk;
            }
        }
        let d = l[k * n + k];
        if d <= 0.0 {
            return Err(Error::GramSolveFailed {
                reason: "projection normal matrix is not positive definite".into(),
            });
        }
        let d = d.sqrt();
        l[k * n + k] = d;
        for i in (k + 1)..n {
            l[i * n + k] /= d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = CompensatedSum::new();
        acc.add(rhs[i]);
        for j in 0..i {
            acc.add(-(l[i * n + j] * y[j]));
        }
        y[i] = acc.value() / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = CompensatedSum::new();
        acc.add(y[i]);
        for j in (i + 1)..n {
            acc.add(-(l[j * n + i] * x[j]));
        }
        x[i] = acc.value() / l[i * n + i];
    }
    Ok(x)
}
