//! N-qubit pure states and the basis-level kernels everything else builds on.
//!
//! Bit convention: qubit `l` is bit `l` of the amplitude index, and a bit
//! value of 0 is the sigma_z = +1 eigenstate. Every module in the crate
//! relies on this ordering.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

pub const MIN_QUBITS: usize = 1;
pub const MAX_QUBITS: usize = 24;

/// Tolerance on the unit norm of every state handed out by this module.
pub const NORM_TOL: f64 = 1e-10;

/// A 2x2 complex matrix acting on one qubit, indexed `[row][col]`.
pub type Gate = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const IDENTITY: Gate = [[ONE, ZERO], [ZERO, ONE]];
pub const PAULI_X: Gate = [[ZERO, ONE], [ONE, ZERO]];

/// exp(-i angle sigma_y). Real-valued, so it is also returned as a rotation.
pub fn y_rotation(angle: f64) -> Gate {
    let (s, c) = angle.sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

/// V^dagger where V = [[1, 1], [i, -i]] / sqrt(2) has the sigma_y eigenvectors
/// as columns (so V^dagger sigma_y V = sigma_z). Applying this to every qubit
/// maps the y product basis onto the computational basis.
pub fn y_basis_change() -> Gate {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
    ]
}

pub fn is_unitary(u: &Gate, tol: f64) -> bool {
    for i in 0..2 {
        for j in 0..2 {
            let dot: Complex64 = (0..2).map(|r| u[r][i].conj() * u[r][j]).sum();
            let target = if i == j { ONE } else { ZERO };
            if (dot - target).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Polar angles of a point on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAngles {
    theta: f64,
    phi: f64,
}

impl BlochAngles {
    /// `theta` in [0, pi], `phi` in (-pi, pi].
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        use std::f64::consts::PI;
        if !(0.0..=PI).contains(&theta) {
            return invalid(format!("theta = {theta} outside [0, pi]"));
        }
        if !(phi > -PI && phi <= PI) {
            return invalid(format!("phi = {phi} outside (-pi, pi]"));
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector (X, Y, Z) the coherent state is centred on.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Pure state of `n_qubits` spins stored as a flat amplitude vector of length 2^N.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRegisterState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

pub(crate) fn check_size(n_qubits: usize, min: usize) -> Result<()> {
    if n_qubits < min || n_qubits > MAX_QUBITS {
        return Err(Error::Size(n_qubits));
    }
    Ok(())
}

impl QubitRegisterState {
    /// Wraps an amplitude vector; its length must be a power of two and its
    /// norm one within [`NORM_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() || amps.len() < 2 {
            return invalid(format!("amplitude count {} is not 2^N with N >= 1", amps.len()));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        check_size(n_qubits, MIN_QUBITS)?;
        let state = Self { n_qubits, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return invalid(format!("state norm^2 = {norm}, expected 1"));
        }
        Ok(state)
    }

    /// Computational basis state with the given index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_size(n_qubits, MIN_QUBITS)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return invalid(format!("basis index {index} >= 2^{n_qubits}"));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Haar-distributed random state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_size(n_qubits, MIN_QUBITS)?;
        let mut amps: Vec<Complex64> = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Self { n_qubits, amps }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// |<self|other>|; errors on a size mismatch.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        self.expect_qubits(other.n_qubits)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub(crate) fn expect_qubits(&self, n: usize) -> Result<()> {
        if self.n_qubits != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.n_qubits });
        }
        Ok(())
    }

    pub fn walsh_hadamard_in_place(&mut self) {
        fwht_in_place(&mut self.amps);
    }

    /// Debug dump, one `index,re,im` line per amplitude after a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(out, "{i},{:e},{:e}", a.re, a.im)?;
        }
        Ok(())
    }

    /// Inverse of [`QubitRegisterState::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut amps = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 && line.trim() == "index,re,im" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("line {}: {e}", lineno + 1)));
            if fields.len() != 3 {
                return invalid(format!("line {}: expected index,re,im", lineno + 1));
            }
            let index: usize = fields[0].trim().parse().map_err(|e| Error::Invalid(format!("line {}: {e}", lineno + 1)))?;
            if index != amps.len() {
                return invalid(format!("line {}: index {index} out of order", lineno + 1));
            }
            amps.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        Self::from_amplitudes(amps)
    }
}

/// Spin coherent state: every qubit in cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
pub fn coherent_state(n_qubits: usize, angles: BlochAngles) -> Result<QubitRegisterState> {
    check_size(n_qubits, 2)?;
    let a0 = Complex64::new((angles.theta / 2.0).cos(), 0.0);
    let a1 = Complex64::from_polar((angles.theta / 2.0).sin(), angles.phi);
    let dim = 1usize << n_qubits;
    let mut amps = vec![ZERO; dim];
    amps[0] = ONE;
    for l in 0..n_qubits {
        let half = 1usize << l;
        for x in 0..half {
            let a = amps[x];
            amps[x + half] = a * a1;
            amps[x] = a * a0;
        }
    }
    Ok(QubitRegisterState { n_qubits, amps })
}

/// H^{(x)N} with the unitary 1/sqrt(2) normalization per qubit.
pub fn walsh_hadamard(state: &QubitRegisterState) -> QubitRegisterState {
    let mut out = state.clone();
    out.walsh_hadamard_in_place();
    out
}

/// Applies `u` to one qubit; `u` must be unitary within 1e-12.
pub fn apply_single_qubit(state: &QubitRegisterState, qubit: usize, u: &Gate) -> Result<QubitRegisterState> {
    if qubit >= state.n_qubits {
        return invalid(format!("qubit {qubit} out of range for {} qubits", state.n_qubits));
    }
    if !is_unitary(u, 1e-12) {
        return invalid("gate is not unitary within 1e-12");
    }
    let mut out = state.clone();
    apply_gate_in_place(&mut out.amps, qubit, u);
    Ok(out)
}

/// Weight of the state inside the permutation-symmetric (Dicke) subspace.
pub fn pss_weight(state: &QubitRegisterState) -> f64 {
    let n = state.n_qubits;
    let mut buckets = vec![ZERO; n + 1];
    for (x, a) in state.amps.iter().enumerate() {
        buckets[x.count_ones() as usize] += a;
    }
    let mut binom = 1.0f64;
    let mut weight = 0.0;
    for (m, s) in buckets.iter().enumerate() {
        weight += s.norm_sqr() / binom;
        binom = binom * (n - m) as f64 / (m + 1) as f64;
    }
    weight.clamp(0.0, 1.0)
}

/// Unnormalized in-place Walsh-Hadamard butterflies (scales the norm by 2^N).
///
/// Stages are processed two at a time (radix 4) so the vector is swept
/// ceil(N/2) times.
pub fn fwht_unnormalized(amps: &mut [Complex64]) {
    let dim = amps.len();
    debug_assert!(dim.is_power_of_two());
    let n = dim.trailing_zeros() as usize;
    let mut q = 0;
    while q + 1 < n {
        let h = 1usize << q;
        for block in amps.chunks_exact_mut(4 * h) {
            let (b01, b23) = block.split_at_mut(2 * h);
            let (b0, b1) = b01.split_at_mut(h);
            let (b2, b3) = b23.split_at_mut(h);
            for j in 0..h {
                let (a, b, c, d) = (b0[j], b1[j], b2[j], b3[j]);
                let (s1, d1, s2, d2) = (a + b, a - b, c + d, c - d);
                b0[j] = s1 + s2;
                b1[j] = d1 + d2;
                b2[j] = s1 - s2;
                b3[j] = d1 - d2;
            }
        }
        q += 2;
    }
    if q < n {
        let h = 1usize << q;
        for block in amps.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
    }
}

/// Normalized transform; an involution.
pub fn fwht_in_place(amps: &mut [Complex64]) {
    fwht_unnormalized(amps);
    let scale = (amps.len() as f64).sqrt().recip();
    amps.iter_mut().for_each(|a| *a *= scale);
}

pub(crate) fn apply_gate_in_place(amps: &mut [Complex64], qubit: usize, u: &Gate) {
    let h = 1usize << qubit;
    for block in amps.chunks_exact_mut(2 * h) {
        let (lo, hi) = block.split_at_mut(h);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = u[0][0] * x + u[0][1] * y;
            *b = u[1][0] * x + u[1][1] * y;
        }
    }
}

/// Applies the same gate to every qubit.
pub(crate) fn apply_gate_all_in_place(amps: &mut [Complex64], u: &Gate) {
    let n = amps.len().trailing_zeros() as usize;
    for q in 0..n {
        apply_gate_in_place(amps, q, u);
    }
}

/// Applies the real rotation [[c, -s], [s, c]] to every qubit.
pub(crate) fn rotate_all_in_place(amps: &mut [Complex64], c: f64, s: f64) {
    let n = amps.len().trailing_zeros() as usize;
    for q in 0..n {
        let h = 1usize << q;
        for block in amps.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x * c - y * s;
                *b = x * s + y * c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn coherent_poles() {
        let s = coherent_state(4, BlochAngles::new(0.0, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        let s = coherent_state(3, BlochAngles::new(PI, 0.0).unwrap()).unwrap();
        assert!((s.amplitudes()[7] - ONE).norm() < 1e-15);
        assert!(s.amplitudes()[..7].iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn coherent_rejects_bad_sizes_and_angles() {
        let a = BlochAngles::new(1.0, 0.5).unwrap();
        assert!(matches!(coherent_state(1, a), Err(Error::Size(1))));
        assert!(matches!(coherent_state(25, a), Err(Error::Size(25))));
        assert!(BlochAngles::new(-0.1, 0.0).is_err());
        assert!(BlochAngles::new(0.1, -PI).is_err());
        assert!(BlochAngles::new(0.1, PI).is_ok());
    }

    #[test]
    fn hadamard_small_cases() {
        let s = QubitRegisterState::basis(1, 0).unwrap();
        let t = walsh_hadamard(&s);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(t.amplitudes(), &[h, h], 1e-15));

        let t = walsh_hadamard(&QubitRegisterState::basis(2, 0).unwrap());
        assert!(close(t.amplitudes(), &[Complex64::new(0.5, 0.0); 4], 1e-15));
    }

    #[test]
    fn hadamard_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let s = QubitRegisterState::random(n, &mut rng).unwrap();
            let dim = 1 << n;
            let expect: Vec<Complex64> = (0..dim)
                .map(|r| {
                    (0..dim)
                        .map(|c: usize| {
                            let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                            s.amplitudes()[c] * sign / (dim as f64).sqrt()
                        })
                        .sum()
                })
                .collect();
            assert!(close(walsh_hadamard(&s).amplitudes(), &expect, 1e-12), "n = {n}");
        }
    }

    #[test]
    fn single_qubit_gates() {
        let s = QubitRegisterState::basis(2, 0).unwrap();
        let t = apply_single_qubit(&s, 0, &PAULI_X).unwrap();
        assert!((t.amplitudes()[1] - ONE).norm() < 1e-15);
        let t = apply_single_qubit(&s, 1, &IDENTITY).unwrap();
        assert_eq!(t, s);
        assert!(apply_single_qubit(&s, 2, &IDENTITY).is_err());
        let bad = [[ONE, ONE], [ZERO, ONE]];
        assert!(apply_single_qubit(&s, 0, &bad).is_err());
    }

    #[test]
    fn rotating_north_pole_gives_equatorial_coherent_state() {
        let n = 5;
        let mut s = QubitRegisterState::basis(n, 0).unwrap();
        for q in 0..n {
            s = apply_single_qubit(&s, q, &y_rotation(PI / 4.0)).unwrap();
        }
        let target = coherent_state(n, BlochAngles::new(PI / 2.0, 0.0).unwrap()).unwrap();
        assert!(close(s.amplitudes(), target.amplitudes(), 1e-14));
    }

    #[test]
    fn y_basis_change_diagonalizes_sigma_y() {
        let v_dag = y_basis_change();
        assert!(is_unitary(&v_dag, 1e-15));
        assert_abs_diff_eq!(v_dag[0][1].im, -FRAC_1_SQRT_2, epsilon = 1e-16);
        assert_abs_diff_eq!(v_dag[1][1].im, FRAC_1_SQRT_2, epsilon = 1e-16);
        // V^dagger sigma_y V == sigma_z
        let i = Complex64::new(0.0, 1.0);
        let sy: Gate = [[ZERO, -i], [i, ZERO]];
        let mul = |a: &Gate, b: &Gate| -> Gate {
            let mut m = [[ZERO; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
                }
            }
            m
        };
        let v = [[v_dag[0][0].conj(), v_dag[1][0].conj()], [v_dag[0][1].conj(), v_dag[1][1].conj()]];
        let z = mul(&mul(&v_dag, &sy), &v);
        assert!((z[0][0] - ONE).norm() < 1e-15 && (z[1][1] + ONE).norm() < 1e-15);
        assert!(z[0][1].norm() < 1e-15 && z[1][0].norm() < 1e-15);
    }

    #[test]
    fn pss_weight_examples() {
        let s = coherent_state(7, BlochAngles::new(2.25, 1.1).unwrap()).unwrap();
        assert_abs_diff_eq!(pss_weight(&s), 1.0, epsilon = 1e-12);
        let s = QubitRegisterState::basis(2, 0b01).unwrap();
        assert_abs_diff_eq!(pss_weight(&s), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pss_weight_of_random_states_is_dimension_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let reps = 200;
        let mean: f64 = (0..reps)
            .map(|_| pss_weight(&QubitRegisterState::random(n, &mut rng).unwrap()))
            .sum::<f64>()
            / reps as f64;
        let expect = 13.0 / 4096.0;
        // Each sample is a sum of 13 chi^2_2/dim terms: relative sd ~ 1/sqrt(13 reps).
        assert!((mean - expect).abs() < 0.15 * expect, "mean = {mean}");
    }

    #[test]
    fn csv_dump_round_trips() {
        let s = coherent_state(3, BlochAngles::new(0.7, -0.3).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,re,im\n0,"));
        let back = QubitRegisterState::read_csv(&buf[..]).unwrap();
        assert!(close(back.amplitudes(), s.amplitudes(), 1e-15));
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(QubitRegisterState::from_amplitudes(vec![ONE; 3]).is_err());
        assert!(QubitRegisterState::from_amplitudes(vec![ONE, ONE]).is_err());
        assert!(QubitRegisterState::from_amplitudes(vec![ONE, ZERO]).is_ok());
    }
}
