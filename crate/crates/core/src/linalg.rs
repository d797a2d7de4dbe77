//! Small dense symmetric linear algebra on row-major slices.

use crate::scalar::Real;

/// `sigma * sigma^T` for a `d x d` row-major matrix.
pub fn gram<S: Real>(sigma: &[S], d: usize) -> Vec<S> {
    let mut out = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = S::zero();
            for k in 0..d {
                acc += sigma[i * d + k] * sigma[j * d + k];
            }
            out[i * d + j] = acc;
            out[j * d + i] = acc;
        }
    }
    out
}

/// Lower Cholesky factor, or `None` when the matrix is not positive definite.
pub fn cholesky<S: Real>(a: &[S], d: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > S::zero()) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the Cholesky factor.
pub fn cholesky_solve<S: Real>(l: &[S], d: usize, b: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![S::zero(); d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    x
}

/// `A x` for a row-major `d x d` matrix.
pub fn mat_vec<S: Real>(a: &[S], d: usize, x: &[S]) -> Vec<S> {
    (0..d)
        .map(|i| (0..d).map(|k| a[i * d + k] * x[k]).sum())
        .collect()
}

/// `A^T x` for a row-major `d x d` matrix.
pub fn mat_t_vec<S: Real>(a: &[S], d: usize, x: &[S]) -> Vec<S> {
    (0..d)
        .map(|j| (0..d).map(|k| a[k * d + j] * x[k]).sum())
        .collect()
}

pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues<S: Real>(a: &[S], d: usize) -> Vec<S> {
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| a[i * d + j].as_f64());
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev.into_iter().map(S::lit).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let sigma = [0.2f64, 0.0, 0.05, 0.3];
        let g = gram(&sigma, 2);
        let l = cholesky(&g, 2).unwrap();
        let b = [0.05f64, 0.07];
        let x = cholesky_solve(&l, 2, &b);
        let back = mat_vec(&g, 2, &x);
        assert!((back[0] - b[0]).abs() < 1e-14 && (back[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_factor() {
        assert!(cholesky(&[1.0, 1.0, 1.0, 1.0], 2).is_none());
        assert!(cholesky(&[0.0f32], 1).is_none());
    }

    #[test]
    fn eigenvalues_sorted() {
        let ev = symmetric_eigenvalues(&[2.0f64, 1.0, 1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
