//! Collective spin moments, reduced density matrices and entanglement entropy.
//!
//! J_a = sum_l sigma^a_l / 2. The x and y moments are evaluated by rotating a
//! copy of the state so the relevant axis becomes z: H on every qubit for x,
//! and [`hilbert::y_basis_change`] (V^dagger) for y.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hilbert::{self, QubitRegisterState};

/// Eigenvalues below this are dropped from the entropy sum.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Observables recorded at one kick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub n: u64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub j2: f64,
    /// Entanglement entropy in bits of the lowest `q_subsystem` qubits, when scheduled.
    pub entropy_q: Option<f64>,
    pub pss_weight: f64,
    pub q_subsystem: usize,
}

fn lambda_squared_by_popcount(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|down| {
            let lambda = (n as f64 - 2.0 * down as f64) / 2.0;
            lambda * lambda
        })
        .collect()
}

fn diagonal_moment(amps: &[Complex64], weights: &[f64]) -> f64 {
    amps.iter().enumerate().map(|(x, a)| a.norm_sqr() * weights[x.count_ones() as usize]).sum()
}

/// ⟨J_z^2⟩.
pub fn jz_squared(state: &QubitRegisterState) -> f64 {
    diagonal_moment(state.amplitudes(), &lambda_squared_by_popcount(state.n_qubits()))
}

/// ⟨J_x^2⟩.
pub fn jx_squared(state: &QubitRegisterState) -> f64 {
    jz_squared(&hilbert::walsh_hadamard(state))
}

/// ⟨J_y^2⟩.
pub fn jy_squared(state: &QubitRegisterState) -> f64 {
    let mut amps = state.amplitudes().to_vec();
    hilbert::apply_gate_all_in_place(&mut amps, &hilbert::y_basis_change());
    diagonal_moment(&amps, &lambda_squared_by_popcount(state.n_qubits()))
}

/// ⟨J^2⟩ = ⟨J_x^2⟩ + ⟨J_y^2⟩ + ⟨J_z^2⟩.
pub fn j_squared(state: &QubitRegisterState) -> f64 {
    jx_squared(state) + jy_squared(state) + jz_squared(state)
}

/// Reusable scratch for measuring many states of one size.
#[derive(Debug)]
pub struct Observer {
    n_qubits: usize,
    weights: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Observer {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, weights: lambda_squared_by_popcount(n_qubits), scratch: vec![Complex64::default(); 1 << n_qubits] }
    }

    /// Full sample at kick `n`; entropy of the lowest `q` qubits if requested.
    pub fn measure(&mut self, state: &QubitRegisterState, n: u64, q: Option<usize>) -> Result<ObservableSample> {
        state.expect_qubits(self.n_qubits)?;
        let amps = state.amplitudes();
        let jz2 = diagonal_moment(amps, &self.weights);

        self.scratch.copy_from_slice(amps);
        hilbert::fwht_in_place(&mut self.scratch);
        let jx2 = diagonal_moment(&self.scratch, &self.weights);

        // <Jx^2 + Jy^2> = ||J_- psi||^2 - <Jz>, with J_- built by bit moves.
        lowering(amps, &mut self.scratch);
        let transverse = self.scratch.iter().map(|a| a.norm_sqr()).sum::<f64>() - jz_mean(amps);
        let jy2 = transverse - jx2;

        let entropy_q = q.map(|q| bipartite_entropy(state, q)).transpose()?;
        Ok(ObservableSample {
            n,
            jx2,
            jy2,
            jz2,
            j2: jx2 + jy2 + jz2,
            entropy_q,
            pss_weight: hilbert::pss_weight(state),
            q_subsystem: q.unwrap_or(self.n_qubits / 2),
        })
    }
}

/// out = J_- psi; J_- flips a bit from 0 (up) to 1 (down).
fn lowering(amps: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|a| *a = Complex64::default());
    let n = amps.len().trailing_zeros() as usize;
    for l in 0..n {
        let h = 1usize << l;
        for (src, dst) in amps.chunks_exact(2 * h).zip(out.chunks_exact_mut(2 * h)) {
            for (d, s) in dst[h..].iter_mut().zip(&src[..h]) {
                *d += s;
            }
        }
    }
}

fn jz_mean(amps: &[Complex64]) -> f64 {
    let n = amps.len().trailing_zeros() as f64;
    amps.iter().enumerate().map(|(x, a)| a.norm_sqr() * (n / 2.0 - x.count_ones() as f64)).sum()
}

/// Convenience wrapper around [`Observer::measure`].
pub fn measure(state: &QubitRegisterState, n: u64, q: Option<usize>) -> Result<ObservableSample> {
    Observer::new(state.n_qubits()).measure(state, n, q)
}

/// Reduced density matrix of a block of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    q: usize,
    matrix: DMatrix<Complex64>,
}

impl ReducedDensity {
    /// Validates hermiticity (1e-12) and unit trace (1e-10).
    pub fn new(q: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << q;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return invalid(format!("density matrix must be {dim}x{dim} for q = {q}"));
        }
        for a in 0..dim {
            for b in a..dim {
                if (matrix[(a, b)] - matrix[(b, a)].conj()).norm() > 1e-12 {
                    return invalid(format!("density matrix not hermitian at ({a}, {b})"));
                }
            }
        }
        let trace: Complex64 = matrix.diagonal().iter().sum();
        if (trace - 1.0).norm() > 1e-10 {
            return invalid(format!("density matrix trace {trace} != 1"));
        }
        Ok(Self { q, matrix })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.matrix.clone())
    }
}

fn hermitian_eigenvalues(matrix: DMatrix<Complex64>) -> Vec<f64> {
    matrix.symmetric_eigenvalues().iter().copied().collect()
}

/// Gram matrix sum_e rows: out[a, b] = sum_e m[e][a] conj(m[e][b]) over
/// `rows` contiguous rows of length `width`; exactly hermitian by construction.
fn row_gram(amps: &[Complex64], width: usize) -> DMatrix<Complex64> {
    // Accumulate conj(rho) row-major: acc[a][b] = sum_e conj(m[e][a]) m[e][b],
    // which is rho in nalgebra's column-major layout.
    let mut acc = vec![Complex64::default(); width * width];
    for row in amps.chunks_exact(width) {
        for (a, ra) in row.iter().enumerate() {
            if ra.norm_sqr() == 0.0 {
                continue;
            }
            let ca = ra.conj();
            for (dst, rb) in acc[a * width + a..(a + 1) * width].iter_mut().zip(&row[a..]) {
                *dst += ca * rb;
            }
        }
    }
    let mut out = DMatrix::from_vec(width, width, acc);
    // acc[a][b] landed at column a, row b: out[(b, a)] = rho[b][a] for b >= a.
    mirror_lower(&mut out);
    out
}

/// Same for the complementary (high-bit) block: out[e, f] = sum_a m[e][a] conj(m[f][a]).
fn column_gram(amps: &[Complex64], width: usize) -> DMatrix<Complex64> {
    let rows: Vec<&[Complex64]> = amps.chunks_exact(width).collect();
    let dim = rows.len();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for e in 0..dim {
        for f in e..dim {
            out[(f, e)] = rows[f].iter().zip(rows[e]).map(|(x, y)| x * y.conj()).sum();
        }
    }
    mirror_lower(&mut out);
    out
}

/// Fills the strict upper triangle from the lower one.
fn mirror_lower(m: &mut DMatrix<Complex64>) {
    let dim = m.nrows();
    for a in 0..dim {
        m[(a, a)].im = 0.0;
        for b in a + 1..dim {
            m[(a, b)] = m[(b, a)].conj();
        }
    }
}


/// Partial trace over all but the lowest `q` qubits (indices `e 2^q + a`).
pub fn reduced_density(state: &QubitRegisterState, q: usize) -> Result<ReducedDensity> {
    let n = state.n_qubits();
    if q == 0 || q >= n {
        return invalid(format!("subsystem size q = {q} must lie in 1..={}", n - 1));
    }
    Ok(ReducedDensity { q, matrix: row_gram(state.amplitudes(), 1 << q) })
}

/// Von Neumann entropy in bits.
pub fn entanglement_entropy(rho: &ReducedDensity) -> Result<f64> {
    let validated = ReducedDensity::new(rho.q, rho.matrix.clone())?;
    Ok(entropy_bits(&validated.eigenvalues()))
}

fn entropy_bits(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().filter(|&&l| l >= EIGEN_FLOOR).map(|&l| -l * l.log2()).sum::<f64>().max(0.0)
}

/// S of the lowest `q` qubits, diagonalizing whichever side of the cut is smaller.
pub fn bipartite_entropy(state: &QubitRegisterState, q: usize) -> Result<f64> {
    let n = state.n_qubits();
    if q == 0 || q >= n {
        return invalid(format!("subsystem size q = {q} must lie in 1..={}", n - 1));
    }
    let width = 1usize << q;
    let gram = if 2 * q <= n { row_gram(state.amplitudes(), width) } else { column_gram(state.amplitudes(), width) };
    Ok(entropy_bits(&hermitian_eigenvalues(gram)))
}
