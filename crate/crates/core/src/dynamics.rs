//! Quenched disorder, the diagonal interaction phases and the kicked-top
//! Floquet operator
//!
//! ```text
//! U_w = exp(-i k/(2N) sum_{l<l'} (1 + eps_ll') sx_l sx_l') exp(-i p/2 sum_l sy_l)
//! ```
//!
//! The interaction factor is diagonal in the sigma_x product basis, so
//! `U_w = H D H R` with `H` the Walsh-Hadamard transform, `D` the phase table
//! and `R` the per-qubit y rotation (applied to the ket first).

use std::f64::consts::{FRAC_PI_2, PI};

use log::warn;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{self, check_size, QubitRegisterState};
use crate::observables::{self, ObservableSample};

/// Kick period. Folded into k; kept only to document the convention.
pub const TAU: f64 = 1.0;

/// Parameters of one Floquet period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetParams {
    pub n_qubits: usize,
    /// Interaction strength (chaos parameter).
    pub k: f64,
    /// Kick rotation angle.
    pub p: f64,
}

impl FloquetParams {
    pub fn new(n_qubits: usize, k: f64, p: f64) -> Result<Self> {
        check_size(n_qubits, 1)?;
        if !(k >= 0.0) || !k.is_finite() {
            return invalid(format!("k = {k} must be finite and >= 0"));
        }
        if !p.is_finite() {
            return invalid("p must be finite");
        }
        // The clean Floquet operator is periodic in k with period 4 pi N.
        if k > 0.1 * 4.0 * PI * n_qubits as f64 {
            warn!("k = {k} is not small against the 4 pi N = {:.1} periodicity of U in k", 4.0 * PI * n_qubits as f64);
        }
        Ok(Self { n_qubits, k, p })
    }

    /// Standard kicked top, p = pi/2.
    pub fn kicked(n_qubits: usize, k: f64) -> Result<Self> {
        Self::new(n_qubits, k, FRAC_PI_2)
    }
}

/// One draw of the symmetric coupling disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    n_qubits: usize,
    width: f64,
    seed: u64,
    couplings: Vec<f64>,
}

/// Position of the pair (l, l'), l < l', in row-major upper-triangular order.
#[inline]
pub fn pair_index(n: usize, l: usize, lp: usize) -> usize {
    debug_assert!(l < lp && lp < n);
    l * (2 * n - l - 1) / 2 + (lp - l - 1)
}

impl DisorderRealization {
    /// Disorder-free realization.
    pub fn clean(n_qubits: usize) -> Self {
        Self { n_qubits, width: 0.0, seed: 0, couplings: vec![0.0; n_qubits * n_qubits.saturating_sub(1) / 2] }
    }

    /// Explicit couplings in [`pair_index`] order.
    pub fn from_couplings(n_qubits: usize, width: f64, seed: u64, couplings: Vec<f64>) -> Result<Self> {
        let expected = n_qubits * n_qubits.saturating_sub(1) / 2;
        if couplings.len() != expected {
            return invalid(format!("{} couplings given, {expected} expected for N = {n_qubits}", couplings.len()));
        }
        Ok(Self { n_qubits, width, seed, couplings })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// eps_{l l'}, symmetric in its arguments; zero on the diagonal.
    pub fn coupling(&self, l: usize, lp: usize) -> f64 {
        match l.cmp(&lp) {
            std::cmp::Ordering::Less => self.couplings[pair_index(self.n_qubits, l, lp)],
            std::cmp::Ordering::Greater => self.couplings[pair_index(self.n_qubits, lp, l)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }
}

/// Draws i.i.d. Normal(0, width^2) couplings from a ChaCha stream keyed by `seed`.
pub fn sample_disorder(n_qubits: usize, width: f64, seed: u64) -> Result<DisorderRealization> {
    if !(width >= 0.0) || !width.is_finite() {
        return invalid(format!("disorder width {width} must be finite and >= 0"));
    }
    check_size(n_qubits, 1)?;
    let count = n_qubits * (n_qubits - 1) / 2;
    let couplings = if width == 0.0 {
        vec![0.0; count]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                width * z
            })
            .collect()
    };
    Ok(DisorderRealization { n_qubits, width, seed, couplings })
}

/// splitmix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one realization, keyed so that adding grid points or sizes never
/// changes the streams of existing ones.
pub fn realization_seed(master_seed: u64, n_qubits: usize, width: f64, realization: u64) -> u64 {
    let mut h = mix64(master_seed);
    h = mix64(h ^ n_qubits as u64);
    h = mix64(h ^ width.to_bits());
    mix64(h ^ realization)
}

/// theta(x) for every computational basis index, in the sigma_x frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    n_qubits: usize,
    angles: Vec<f64>,
}

impl PhaseTable {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

fn check_table_inputs(params: &FloquetParams, disorder: &DisorderRealization) -> Result<()> {
    if params.n_qubits != disorder.n_qubits {
        return Err(Error::DimensionMismatch { expected: params.n_qubits, got: disorder.n_qubits });
    }
    check_size(params.n_qubits, 1)
}

#[inline]
fn spin(x: usize, l: usize) -> f64 {
    if (x >> l) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exact sum_{l<l'} eps s_l s_l' for one configuration, O(N^2).
fn disorder_energy(disorder: &DisorderRealization, x: usize) -> f64 {
    let n = disorder.n_qubits;
    let mut total = 0.0;
    for l in 0..n {
        let sl = spin(x, l);
        let mut row = 0.0;
        for lp in l + 1..n {
            row += disorder.couplings[pair_index(n, l, lp)] * spin(x, lp);
        }
        total += sl * row;
    }
    total
}

/// Gray-code sweep: O(2^N N), re-anchored against the exact sum every 1024 steps.
pub fn build_phase_table(params: &FloquetParams, disorder: &DisorderRealization) -> Result<PhaseTable> {
    check_table_inputs(params, disorder)?;
    let n = params.n_qubits;
    let dim = 1usize << n;
    let scale = params.k / (2.0 * n as f64);
    // Uniform part: sum_{l<l'} s s = (M^2 - N) / 2 with M the magnetization.
    let uniform: Vec<f64> = (0..=n)
        .map(|down| {
            let m = n as f64 - 2.0 * down as f64;
            (m * m - n as f64) / 2.0
        })
        .collect();

    let mut angles = vec![0.0; dim];
    let mut spins = vec![1.0f64; n];
    let mut energy = disorder_energy(disorder, 0);
    let mut gray = 0usize;
    angles[0] = scale * (uniform[0] + energy);
    for i in 1..dim {
        let f = i.trailing_zeros() as usize;
        gray ^= 1 << f;
        if i % 1024 == 0 {
            energy = disorder_energy(disorder, gray);
            spins[f] = -spins[f];
        } else {
            let mut field = 0.0;
            for (l, s) in spins.iter().enumerate() {
                if l != f {
                    field += disorder.coupling(f, l) * s;
                }
            }
            energy -= 2.0 * spins[f] * field;
            spins[f] = -spins[f];
        }
        angles[gray] = scale * (uniform[gray.count_ones() as usize] + energy);
    }
    Ok(PhaseTable { n_qubits: n, angles })
}

/// Direct O(2^N N^2) evaluation of the defining pair sum.
pub fn build_phase_table_bruteforce(params: &FloquetParams, disorder: &DisorderRealization) -> Result<PhaseTable> {
    check_table_inputs(params, disorder)?;
    let n = params.n_qubits;
    let scale = params.k / (2.0 * n as f64);
    let angles = (0..1usize << n)
        .map(|x| {
            let mut total = 0.0;
            for l in 0..n {
                for lp in l + 1..n {
                    total += (1.0 + disorder.coupling(l, lp)) * spin(x, l) * spin(x, lp);
                }
            }
            scale * total
        })
        .collect();
    Ok(PhaseTable { n_qubits: n, angles })
}

fn check_step_inputs(state: &QubitRegisterState, phases: &PhaseTable, params: &FloquetParams) -> Result<()> {
    state.expect_qubits(params.n_qubits)?;
    if phases.n_qubits != params.n_qubits {
        return Err(Error::DimensionMismatch { expected: params.n_qubits, got: phases.n_qubits });
    }
    Ok(())
}

/// One application of U_w: y rotation, to the x frame, phases, back.
///
/// Reference path; [`FloquetPropagator`] does the same in fewer sweeps.
pub fn floquet_step(state: &QubitRegisterState, phases: &PhaseTable, params: &FloquetParams) -> Result<QubitRegisterState> {
    check_step_inputs(state, phases, params)?;
    let mut amps = state.amplitudes().to_vec();
    let (s, c) = (params.p / 2.0).sin_cos();
    hilbert::rotate_all_in_place(&mut amps, c, s);
    hilbert::fwht_in_place(&mut amps);
    for (a, &theta) in amps.iter_mut().zip(&phases.angles) {
        *a *= Complex64::from_polar(1.0, -theta);
    }
    hilbert::fwht_in_place(&mut amps);
    Ok(QubitRegisterState::from_raw(params.n_qubits, amps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    /// p = pi/2: exp(-i pi/4 sy) = H Z, so U = H (D Z) and one unnormalized
    /// transform per kick suffices; Z and 2^{-N/2} live in the diagonal.
    HalfPi,
    /// Generic p, evaluated in the sigma_x frame: U_x = D R(-p/2).
    XFrame { c: f64, s: f64 },
    /// p = 0: U_x = D.
    Unkicked,
}

/// Precomputed Floquet operator for repeated application.
#[derive(Debug, Clone)]
pub struct FloquetPropagator {
    n_qubits: usize,
    kernel: Kernel,
    diagonal: Vec<Complex64>,
}

impl FloquetPropagator {
    pub fn new(phases: &PhaseTable, params: &FloquetParams) -> Result<Self> {
        if phases.n_qubits != params.n_qubits {
            return Err(Error::DimensionMismatch { expected: params.n_qubits, got: phases.n_qubits });
        }
        let n = params.n_qubits;
        let kernel = if (params.p - FRAC_PI_2).abs() < 1e-15 {
            Kernel::HalfPi
        } else if params.p == 0.0 {
            Kernel::Unkicked
        } else {
            let (s, c) = (-params.p / 2.0).sin_cos();
            Kernel::XFrame { c, s }
        };
        let diagonal = match kernel {
            Kernel::HalfPi => {
                let norm = (-(n as f64) / 2.0).exp2();
                phases
                    .angles
                    .iter()
                    .enumerate()
                    .map(|(x, &theta)| {
                        let sign = if x.count_ones() % 2 == 0 { norm } else { -norm };
                        Complex64::from_polar(sign, -theta)
                    })
                    .collect()
            }
            _ => phases.angles.iter().map(|&theta| Complex64::from_polar(1.0, -theta)).collect(),
        };
        Ok(Self { n_qubits: n, kernel, diagonal })
    }

    /// Builds the phase table and the propagator in one go.
    pub fn from_disorder(params: &FloquetParams, disorder: &DisorderRealization) -> Result<Self> {
        Self::new(&build_phase_table(params, disorder)?, params)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Applies U_w `kicks` times in place.
    pub fn advance(&self, state: &mut QubitRegisterState, kicks: u64) -> Result<()> {
        state.expect_qubits(self.n_qubits)?;
        if kicks == 0 {
            return Ok(());
        }
        let amps = state.amplitudes_mut();
        match self.kernel {
            Kernel::HalfPi => {
                for _ in 0..kicks {
                    multiply_diagonal(amps, &self.diagonal);
                    hilbert::fwht_unnormalized(amps);
                }
            }
            Kernel::XFrame { c, s } => {
                hilbert::fwht_in_place(amps);
                for _ in 0..kicks {
                    hilbert::rotate_all_in_place(amps, c, s);
                    multiply_diagonal(amps, &self.diagonal);
                }
                hilbert::fwht_in_place(amps);
            }
            Kernel::Unkicked => {
                hilbert::fwht_in_place(amps);
                let total = kicks as f64;
                if kicks == 1 {
                    multiply_diagonal(amps, &self.diagonal);
                } else {
                    // U^n is diagonal too; exponentiate the phase directly.
                    for (a, d) in amps.iter_mut().zip(&self.diagonal) {
                        *a *= Complex64::from_polar(1.0, d.arg() * total);
                    }
                }
                hilbert::fwht_in_place(amps);
            }
        }
        Ok(())
    }
}

#[inline]
fn multiply_diagonal(amps: &mut [Complex64], diag: &[Complex64]) {
    for (a, d) in amps.iter_mut().zip(diag) {
        *a *= d;
    }
}

/// Kick indices at which observables (and, on a subset, the entropy) are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSchedule {
    kicks: Vec<u64>,
    entropy: Vec<bool>,
    /// Subsystem size for the entanglement entropy.
    pub entropy_q: usize,
}

impl RecordSchedule {
    /// Explicit schedule; `entropy_kicks` must be a subset of `kicks`.
    pub fn new(mut kicks: Vec<u64>, entropy_kicks: &[u64], entropy_q: usize) -> Result<Self> {
        kicks.sort_unstable();
        kicks.dedup();
        let entropy = kicks.iter().map(|n| entropy_kicks.contains(n)).collect::<Vec<_>>();
        if entropy.iter().filter(|&&e| e).count() != {
            let mut e = entropy_kicks.to_vec();
            e.sort_unstable();
            e.dedup();
            e.len()
        } {
            return invalid("entropy kicks must be a subset of the recorded kicks");
        }
        Ok(Self { kicks, entropy, entropy_q })
    }

    /// Every `stride`-th kick in `[start, end]`, entropy every `entropy_stride`-th
    /// of those kicks (0 disables the entropy).
    pub fn strided(start: u64, end: u64, stride: u64, entropy_stride: u64, entropy_q: usize) -> Result<Self> {
        if stride == 0 || start > end {
            return invalid("stride must be positive and start <= end");
        }
        let mut kicks: Vec<u64> = (start..=end).step_by(stride as usize).collect();
        if *kicks.last().unwrap() != end {
            kicks.push(end);
        }
        let entropy = kicks
            .iter()
            .map(|&n| entropy_stride != 0 && (n - start) % (stride * entropy_stride) == 0)
            .collect();
        Ok(Self { kicks, entropy, entropy_q })
    }

    /// Every kick up to 1000, then ~50 log-spaced points per decade up to
    /// `n_max`; entropy on every `entropy_every`-th recorded point.
    pub fn log_spaced(n_max: u64, entropy_every: usize, entropy_q: usize) -> Self {
        let mut kicks: Vec<u64> = (0..=n_max.min(1000)).collect();
        if n_max > 1000 {
            let per_decade = 50.0;
            let mut i = 1.0;
            loop {
                let n = (1000.0 * 10f64.powf(i / per_decade)).round() as u64;
                if n >= n_max {
                    break;
                }
                if n > *kicks.last().unwrap() {
                    kicks.push(n);
                }
                i += 1.0;
            }
            kicks.push(n_max);
        }
        let entropy = (0..kicks.len()).map(|i| entropy_every != 0 && i % entropy_every == 0).collect();
        Self { kicks, entropy, entropy_q }
    }

    pub fn kicks(&self) -> &[u64] {
        &self.kicks
    }

    pub fn records_entropy_at(&self, index: usize) -> bool {
        self.entropy[index]
    }

    pub fn last(&self) -> u64 {
        self.kicks.last().copied().unwrap_or(0)
    }
}

/// Evolves `initial` for `n_kicks` kicks, measuring at every scheduled kick <= n_kicks.
pub fn evolve(
    initial: &QubitRegisterState,
    phases: &PhaseTable,
    params: &FloquetParams,
    n_kicks: u64,
    schedule: &RecordSchedule,
) -> Result<Vec<ObservableSample>> {
    check_step_inputs(initial, phases, params)?;
    let propagator = FloquetPropagator::new(phases, params)?;
    evolve_with(&propagator, initial, n_kicks, schedule)
}

/// [`evolve`] with a prebuilt propagator.
pub fn evolve_with(
    propagator: &FloquetPropagator,
    initial: &QubitRegisterState,
    n_kicks: u64,
    schedule: &RecordSchedule,
) -> Result<Vec<ObservableSample>> {
    let n = propagator.n_qubits;
    if schedule.entropy.iter().any(|&e| e) && (schedule.entropy_q == 0 || schedule.entropy_q >= n) {
        return invalid(format!("entropy subsystem {} out of range for N = {n}", schedule.entropy_q));
    }
    let mut state = initial.clone();
    let mut observer = observables::Observer::new(n);
    let mut at = 0u64;
    let mut samples = Vec::new();
    for (i, &kick) in schedule.kicks.iter().enumerate() {
        if kick > n_kicks {
            break;
        }
        propagator.advance(&mut state, kick - at)?;
        at = kick;
        let q = schedule.entropy[i].then_some(schedule.entropy_q);
        samples.push(observer.measure(&state, kick, q)?);
    }
    if samples.is_empty() {
        samples.push(observer.measure(initial, 0, None)?);
    }
    Ok(samples)
}

/// One iteration of the large-spin classical map on the unit sphere.
pub fn classical_map_step(x: f64, y: f64, z: f64, k: f64) -> Result<(f64, f64, f64)> {
    let r2 = x * x + y * y + z * z;
    if (r2 - 1.0).abs() > 1e-9 {
        return invalid(format!("point ({x}, {y}, {z}) is off the unit sphere (|r|^2 = {r2})"));
    }
    let (s, c) = (k * z).sin_cos();
    Ok((z, y * c + x * s, -x * c + y * s))
}
