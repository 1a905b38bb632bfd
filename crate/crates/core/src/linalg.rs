//! Small dense solvers for the (p+1)-dimensional normal equations.
//!
//! Segment fits never exceed a dozen unknowns, so a direct Cholesky with an
//! LU fallback beats pulling in a full linear-algebra stack and stays generic
//! over the scalar type.

use crate::scalar::Scalar;

/// Solves `a x = b` for a symmetric positive (semi-)definite `a` (row-major,
/// `dim x dim`). Falls back to partially pivoted LU when the Cholesky
/// factorization breaks down. Returns `None` when the matrix is numerically
/// singular either way.
pub(crate) fn solve_symmetric<F: Scalar>(a: &[F], b: &[F], dim: usize) -> Option<Vec<F>> {
    debug_assert_eq!(a.len(), dim * dim);
    debug_assert_eq!(b.len(), dim);
    solve_cholesky(a, b, dim).or_else(|| solve_lu(a, b, dim))
}

fn solve_cholesky<F: Scalar>(a: &[F], b: &[F], dim: usize) -> Option<Vec<F>> {
    // Lower-triangular factor, row-major.
    let mut l = vec![F::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= F::zero() || !s.is_finite() {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = b.to_vec();
    for i in 0..dim {
        for k in 0..i {
            let t = l[i * dim + k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * dim + i];
    }
    for i in (0..dim).rev() {
        for k in (i + 1)..dim {
            let t = l[k * dim + i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * dim + i];
    }
    if y.iter().all(|v| v.is_finite()) {
        Some(y)
    } else {
        None
    }
}

fn solve_lu<F: Scalar>(a: &[F], b: &[F], dim: usize) -> Option<Vec<F>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..dim {
        let mut pivot = col;
        let mut best = m[col * dim + col].abs();
        for row in (col + 1)..dim {
            let v = m[row * dim + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best.is_zero() || !best.is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..dim {
                m.swap(col * dim + j, pivot * dim + j);
            }
            x.swap(col, pivot);
        }
        let diag = m[col * dim + col];
        for row in (col + 1)..dim {
            let factor = m[row * dim + col] / diag;
            if factor.is_zero() {
                continue;
            }
            for j in col..dim {
                let t = factor * m[col * dim + j];
                m[row * dim + j] -= t;
            }
            let t = factor * x[col];
            x[row] -= t;
        }
    }
    for i in (0..dim).rev() {
        for j in (i + 1)..dim {
            let t = m[i * dim + j] * x[j];
            x[i] -= t;
        }
        x[i] /= m[i * dim + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cholesky_solves_spd_system() {
        // 4x + 2y = 8, 2x + 3y = 7 -> x = 1.25, y = 1.5
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let b = vec![8.0, 7.0];
        let x = solve_symmetric(&a, &b, 2).unwrap();
        assert_abs_diff_eq!(x[0], 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let b = vec![1.0, 2.0];
        assert!(solve_symmetric(&a, &b, 2).is_none());
    }

    #[test]
    fn lu_fallback_handles_indefinite_input() {
        // Not SPD, still invertible.
        let a = vec![0.0, 1.0, 1.0, 0.0];
        let b = vec![3.0, 5.0];
        let x = solve_symmetric(&a, &b, 2).unwrap();
        assert_abs_diff_eq!(x[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }
}
