//! Small dense linear-algebra helpers: LU solve with partial pivoting and a
//! cyclic Jacobi eigensolver for symmetric matrices. The systems in this
//! crate are small (tens of columns), so plain dense routines are enough and
//! keep results bit-deterministic.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// Solve `a * x = b` for possibly many right-hand sides (columns of `b`).
pub fn solve_multi(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "square matrix required");
    assert_eq!(b.nrows(), n, "rhs row count mismatch");
    let m = b.ncols();

    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        // Partial pivoting.
        let mut pivot = col;
        let mut best = lu[[col, col]].abs();
        for r in col + 1..n {
            let v = lu[[r, col]].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < 1e-12 {
            return Err(Error::SingularDesign);
        }
        if pivot != col {
            for c in 0..n {
                lu.swap([col, c], [pivot, c]);
            }
            for c in 0..m {
                x.swap([col, c], [pivot, c]);
            }
        }
        let d = lu[[col, col]];
        for r in col + 1..n {
            let factor = lu[[r, col]] / d;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = lu[[col, c]];
                lu[[r, c]] -= factor * v;
            }
            for c in 0..m {
                let v = x[[col, c]];
                x[[r, c]] -= factor * v;
            }
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        let d = lu[[col, col]];
        for c in 0..m {
            let mut v = x[[col, c]];
            for k in col + 1..n {
                v -= lu[[col, k]] * x[[k, c]];
            }
            x[[col, c]] = v / d;
        }
    }
    Ok(x)
}

/// Solve for a single right-hand side.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = b.len();
    let b2 = b.clone().into_shape_with_order((n, 1)).expect("reshape");
    let x = solve_multi(a, &b2)?;
    Ok(x.column(0).to_owned())
}

/// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvector `k` is row `k` of the returned matrix.
pub fn symmetric_eigen(matrix: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = matrix.nrows();
    assert_eq!(matrix.ncols(), n, "square matrix required");
    let mut a = matrix.clone();
    let mut v: Array2<f64> = Array2::eye(n);

    let frobenius: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = (1e-14 * frobenius).max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[[j, j]]
            .partial_cmp(&a[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (row, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[row, k]] = v[[k, i]];
        }
    }
    (eigenvalues, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solve_small_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![3.0, 5.0];
        let x = solve(&a, &b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![1.0, 2.0];
        assert!(matches!(solve(&a, &b).unwrap_err(), Error::SingularDesign));
    }

    #[test]
    fn eigen_of_diagonal() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[[0, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = array![
            [4.0, 1.0, 0.5],
            [1.0, 3.0, -0.25],
            [0.5, -0.25, 2.0]
        ];
        let (vals, vecs) = symmetric_eigen(&a);
        // A = V^T diag(vals) V with rows of `vecs` as eigenvectors.
        for i in 0..3 {
            for j in 0..3 {
                let mut r = 0.0;
                for k in 0..3 {
                    r += vecs[[k, i]] * vals[k] * vecs[[k, j]];
                }
                assert!((r - a[[i, j]]).abs() < 1e-10, "({i},{j})");
            }
        }
        // Orthonormal rows.
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| vecs[[i, k]] * vecs[[j, k]]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10);
            }
        }
    }
}
