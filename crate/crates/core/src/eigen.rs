//! Eigenvalue routines for truncated operators.
//!
//! Dense Hermitian problems go through nalgebra. Real symmetric tridiagonal
//! matrices (one-dimensional nearest-neighbour truncations, which can have a
//! few thousand rows) use an implicit QL iteration on each unreduced block,
//! which is quadratic rather than cubic in the size.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// An eigenvalue together with the squared moduli of its normalised
/// eigenvector's components.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub weights: Vec<f64>,
}

/// If `matrix` is real symmetric tridiagonal, returns its diagonal and
/// off-diagonal.
pub fn as_real_tridiagonal(matrix: &DMatrix<Complex64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return None;
    }
    for j in 0..n {
        for i in 0..n {
            let v = matrix[(i, j)];
            if v.im != 0.0 {
                return None;
            }
            if i.abs_diff(j) > 1 && v.re != 0.0 {
                return None;
            }
        }
    }
    let diag = (0..n).map(|i| matrix[(i, i)].re).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let up = matrix[(i, i + 1)].re;
        if up != matrix[(i + 1, i)].re {
            return None;
        }
        off.push(up);
    }
    Some((diag, off))
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(matrix: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if let Some((diag, off)) = as_real_tridiagonal(matrix) {
        return tridiagonal_eigenvalues(&diag, &off);
    }
    let eig = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("Hermitian eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenpairs of a Hermitian matrix, sorted by eigenvalue.
pub fn hermitian_eigenpairs(matrix: &DMatrix<Complex64>) -> Result<Vec<Eigenpair>> {
    if let Some((diag, off)) = as_real_tridiagonal(matrix) {
        return tridiagonal_eigenpairs(&diag, &off);
    }
    let eig = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("Hermitian eigensolver did not converge".into()))?;
    let mut pairs: Vec<Eigenpair> = (0..matrix.nrows())
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            let norm2: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            Eigenpair {
                value: eig.eigenvalues[k],
                weights: col.iter().map(|z| z.norm_sqr() / norm2).collect(),
            }
        })
        .collect();
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// Eigenvalues of a general complex square matrix via Schur decomposition.
pub fn general_eigenvalues(matrix: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let zero = Complex64::new(0.0, 0.0);
    let lower = (0..n).all(|i| (i + 1..n).all(|j| matrix[(i, j)] == zero));
    let upper = (0..n).all(|i| (0..i).all(|j| matrix[(i, j)] == zero));
    if lower || upper {
        // Nilpotent parts (shift truncations) defeat unshifted QR; the
        // diagonal is the spectrum.
        return Ok((0..n).map(|i| matrix[(i, i)]).collect());
    }
    let schur = nalgebra::Schur::try_new(matrix.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Splits a tridiagonal matrix into unreduced blocks at exactly zero
/// off-diagonal entries; returns `(start, len)` pairs.
fn unreduced_blocks(off: &[f64], n: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for (i, &e) in off.iter().enumerate() {
        if e == 0.0 {
            blocks.push((start, i + 1 - start));
            start = i + 1;
        }
    }
    if n > start {
        blocks.push((start, n - start));
    }
    blocks
}

/// Sorted eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples rows `i` and `i+1`).
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::InvalidArgument("off-diagonal must have one entry fewer than the diagonal".into()));
    }
    let mut values = Vec::with_capacity(n);
    for (start, len) in unreduced_blocks(off, n) {
        let mut d = diag[start..start + len].to_vec();
        let mut e = vec![0.0; len];
        e[..len - 1].copy_from_slice(&off[start..start + len - 1]);
        implicit_ql(&mut d, &mut e)?;
        values.extend(d);
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenpairs of a symmetric tridiagonal matrix. Eigenvectors come from
/// inverse iteration inside each unreduced block, where eigenvalues are
/// simple.
pub fn tridiagonal_eigenpairs(diag: &[f64], off: &[f64]) -> Result<Vec<Eigenpair>> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::InvalidArgument("off-diagonal must have one entry fewer than the diagonal".into()));
    }
    let mut pairs = Vec::with_capacity(n);
    for (start, len) in unreduced_blocks(off, n) {
        let d = &diag[start..start + len];
        let e = &off[start..start + len - 1];
        let mut values = d.to_vec();
        let mut work = vec![0.0; len];
        work[..len - 1].copy_from_slice(e);
        implicit_ql(&mut values, &mut work)?;
        for lambda in values {
            let v = inverse_iteration(d, e, lambda);
            let mut weights = vec![0.0; n];
            for (k, x) in v.iter().enumerate() {
                weights[start + k] = x * x;
            }
            pairs.push(Eigenpair { value: lambda, weights });
        }
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// Implicit QL with Wilkinson shifts. `e[i]` couples `i` and `i+1`;
/// `e[n-1]` is scratch. Eigenvalues overwrite `d`.
fn implicit_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 100 {
                return Err(Error::Eigensolver("tridiagonal QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Unit eigenvector of an unreduced tridiagonal block for eigenvalue
/// `lambda`, by two steps of shifted inverse iteration.
fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return vec![1.0];
    }
    let scale = d.iter().chain(e.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let shift = lambda + 1e3 * f64::EPSILON * scale;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 101) as f64 / 101.0)).collect();
    for _ in 0..3 {
        x = solve_shifted_tridiagonal(d, e, shift, &x, scale);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v /= norm;
        }
    }
    x
}

/// Solves `(T - shift) y = b` by Gaussian elimination with partial pivoting
/// on the tridiagonal band; tiny pivots are replaced to keep the solve
/// finite, which is what inverse iteration wants.
fn solve_shifted_tridiagonal(d: &[f64], e: &[f64], shift: f64, b: &[f64], scale: f64) -> Vec<f64> {
    let n = d.len();
    let tiny = f64::EPSILON * scale;
    // Rows after pivoting hold up to two super-diagonals.
    let mut diag: Vec<f64> = d.iter().map(|v| v - shift).collect();
    let mut sup1: Vec<f64> = e.to_vec();
    sup1.push(0.0);
    let mut sup2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..n - 1 {
        if sub[k].abs() > diag[k].abs() {
            // swap rows k and k+1
            std::mem::swap(&mut diag[k], &mut sub[k]);
            let (a1, a2) = (sup1[k], sup2[k]);
            sup1[k] = diag[k + 1];
            sup2[k] = if k + 1 < n - 1 { sup1[k + 1] } else { 0.0 };
            diag[k + 1] = a1;
            sup1[k + 1] = a2;
            rhs.swap(k, k + 1);
            // `sub[k]` now holds the old pivot row's diagonal entry.
        }
        let pivot = if diag[k].abs() < tiny { tiny } else { diag[k] };
        diag[k] = pivot;
        let factor = sub[k] / pivot;
        diag[k + 1] -= factor * sup1[k];
        if k + 1 < n - 1 {
            sup1[k + 1] -= factor * sup2[k];
        }
        rhs[k + 1] -= factor * rhs[k];
    }
    if diag[n - 1].abs() < tiny {
        diag[n - 1] = tiny;
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        if k + 1 < n {
            acc -= sup1[k] * y[k + 1];
        }
        if k + 2 < n {
            acc -= sup2[k] * y[k + 2];
        }
        y[k] = acc / diag[k];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense_from_tridiagonal(diag: &[f64], off: &[f64]) -> DMatrix<Complex64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else if i + 1 == j {
                Complex64::new(off[i], 0.0)
            } else if j + 1 == i {
                Complex64::new(off[j], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn free_chain_matches_cosine_formula() {
        let n = 50;
        let values = tridiagonal_eigenvalues(&vec![0.0; n], &vec![1.0; n - 1]).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in values.iter().zip(&expected) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn ql_agrees_with_dense_solver() {
        let diag: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64) / 3.0 - 1.0).collect();
        let off: Vec<f64> = (0..39).map(|i| if i % 9 == 4 { 0.0 } else { 0.5 + (i % 5) as f64 / 7.0 }).collect();
        let ql = tridiagonal_eigenvalues(&diag, &off).unwrap();
        let dense = dense_from_tridiagonal(&diag, &off);
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut reference: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in ql.iter().zip(&reference) {
            assert_relative_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn inverse_iteration_vectors_are_eigenvectors() {
        let diag: Vec<f64> = (0..30).map(|i| ((i * 13 % 7) as f64) * 0.3).collect();
        let off: Vec<f64> = (0..29).map(|i| 1.0 - (i % 3) as f64 * 0.2).collect();
        let pairs = tridiagonal_eigenpairs(&diag, &off).unwrap();
        assert_eq!(pairs.len(), 30);
        let dense = dense_from_tridiagonal(&diag, &off);
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut order: Vec<usize> = (0..30).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (pair, &k) in pairs.iter().zip(&order) {
            assert_relative_eq!(pair.value, eig.eigenvalues[k], epsilon = 1e-11);
            let total: f64 = pair.weights.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            for (w, z) in pair.weights.iter().zip(eig.eigenvectors.column(k).iter()) {
                assert!((w - z.norm_sqr()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dispatch_detects_tridiagonal() {
        let dense = dense_from_tridiagonal(&[0.0, 2.0], &[1.0]);
        assert!(as_real_tridiagonal(&dense).is_some());
        let values = hermitian_eigenvalues(&dense).unwrap();
        assert_relative_eq!(values[0], 1.0 - 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(values[1], 1.0 + 2f64.sqrt(), epsilon = 1e-14);
        let mut complex = dense.clone();
        complex[(0, 1)] = Complex64::new(0.0, 1.0);
        complex[(1, 0)] = Complex64::new(0.0, -1.0);
        assert!(as_real_tridiagonal(&complex).is_none());
        let values = hermitian_eigenvalues(&complex).unwrap();
        assert_relative_eq!(values[0], 1.0 - 2f64.sqrt(), epsilon = 1e-12);
    }
}
