//! Dense 2^N x 2^N reference constructions from explicit Pauli tensor
//! products, for small N.

#![allow(dead_code)]

use kicktop::dynamics::DisorderRealization;
use kicktop::hilbert::QubitRegisterState;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn sigma_x() -> Mat {
    Mat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> Mat {
    Mat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> Mat {
    Mat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// `op` on qubit `l` of `n`. Qubit l is bit l of the index, so it is the
/// l-th factor counted from the right of the Kronecker product.
pub fn on_qubit(op: &Mat, l: usize, n: usize) -> Mat {
    let mut out = Mat::identity(1, 1);
    for q in (0..n).rev() {
        let f = if q == l { op.clone() } else { Mat::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

pub fn collective(op: &Mat, n: usize) -> Mat {
    let d = 1 << n;
    (0..n).fold(Mat::zeros(d, d), |acc, l| acc + on_qubit(op, l, n) * c(0.5, 0.0))
}

/// exp(-i H) for Hermitian H by eigendecomposition.
pub fn expm_hermitian(h: &Mat) -> Mat {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l)));
    &eig.eigenvectors * Mat::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// U = exp(-i k/(2N) sum_{l<l'} (1 + eps) sx sx) exp(-i p/2 sum sy).
pub fn dense_floquet(n: usize, k: f64, p: f64, disorder: &DisorderRealization) -> Mat {
    let d = 1 << n;
    let mut hint = Mat::zeros(d, d);
    for l in 0..n {
        for lp in l + 1..n {
            let coupling = 1.0 + disorder.coupling(l, lp);
            hint += on_qubit(&sigma_x(), l, n) * on_qubit(&sigma_x(), lp, n) * c(k / (2.0 * n as f64) * coupling, 0.0);
        }
    }
    let hkick = (0..n).fold(Mat::zeros(d, d), |acc, l| acc + on_qubit(&sigma_y(), l, n) * c(p / 2.0, 0.0));
    expm_hermitian(&hint) * expm_hermitian(&hkick)
}

pub fn to_vector(state: &QubitRegisterState) -> DVector<Complex64> {
    DVector::from_column_slice(state.amplitudes())
}

pub fn expectation(op: &Mat, state: &QubitRegisterState) -> f64 {
    let v = to_vector(state);
    (v.adjoint() * op * &v)[(0, 0)].re
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
