//! Small dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Smallest singular value.
pub fn min_singular(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number.
pub fn cond(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return if m[(0, 0)].norm() > 0.0 { 1.0 } else { f64::INFINITY };
    }
    let sv = m.singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    max_abs_diff(m, &m.adjoint()) <= tol * (1.0 + max_abs(m))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], CMat::identity(1, 1));
    }
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Applies a scalar map to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, v) = eigh(m);
    let n = vals.len();
    let mut fv = v.clone();
    for j in 0..n {
        let s = f(vals[j]);
        for i in 0..n {
            fv[(i, j)] *= s;
        }
    }
    fv * v.adjoint()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        return if z.norm() > 0.0 { Some(CMat::from_element(1, 1, z.inv())) } else { None };
    }
    m.clone().try_inverse()
}

/// Moore-Penrose pseudo-inverse with singular values below `rtol * s_max` dropped.
pub fn pinv(m: &CMat, rtol: f64) -> CMat {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for r in 0..k {
        let s = svd.singular_values[r];
        if s <= rtol * smax || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..m.ncols() {
            let vi = vt[(r, i)].conj() * inv;
            for j in 0..m.nrows() {
                out[(i, j)] += vi * u[(j, r)].conj();
            }
        }
    }
    out
}

pub fn rank(m: &CMat, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rtol * smax && s > 0.0).count()
}

/// Eigenvalues of a general complex matrix (diagonal of the complex Schur form);
/// `None` if the Schur iteration does not converge.
pub fn eigenvalues(m: &CMat) -> Option<Vec<C64>> {
    if m.nrows() == 1 {
        return Some(vec![m[(0, 0)]]);
    }
    let t = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)?.unpack().1;
    Some((0..m.nrows()).map(|k| t[(k, k)]).collect())
}

/// Eigenvalues and eigenvectors of a general complex matrix from the complex Schur
/// form, with the 2-norm condition number of the eigenvector matrix. `None` when the
/// triangular back-substitution breaks down (repeated eigenvalue with a nonzero
/// coupling), i.e. the matrix is numerically defective.
pub fn eig_general(m: &CMat) -> Option<(Vec<C64>, CMat, f64)> {
    let n = m.nrows();
    if n == 1 {
        return Some((vec![m[(0, 0)]], CMat::identity(1, 1), 1.0));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)?;
    let (q, t) = schur.unpack();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let vals: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let den = t[(i, i)] - vals[k];
            if den.norm() <= 1e-13 * scale {
                if acc.norm() <= 1e-13 * scale {
                    y[(i, k)] = C64::new(0.0, 0.0);
                    continue;
                }
                return None;
            }
            y[(i, k)] = -acc / den;
        }
    }
    let mut v = q * y;
    for k in 0..n {
        let nrm = v.column(k).norm();
        if nrm > 0.0 {
            let inv = 1.0 / nrm;
            for i in 0..n {
                v[(i, k)] *= inv;
            }
        }
    }
    let kappa = cond(&v);
    Some((vals, v, kappa))
}

/// Solves `S X + X S = R` for Hermitian positive definite `S` in its eigenbasis.
pub fn sylvester_hermitian(s: &CMat, r: &CMat) -> Option<CMat> {
    let (vals, v) = eigh(s);
    if vals.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let rt = v.adjoint() * r * &v;
    let n = vals.len();
    let xt = CMat::from_fn(n, n, |i, j| rt[(i, j)] / (vals[i] + vals[j]));
    Some(&v * xt * v.adjoint())
}
