//! Closed-form baselines: random-state values, the solvable unkicked disorder
//! average, characteristic times and the classical phase portrait.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::classical_map_step;
use crate::error::{invalid, Result};
use crate::hilbert::BlochAngles;

/// ⟨J^2⟩ of a Haar-random state on the full 2^N space.
pub fn rmt_j_squared(n: usize) -> f64 {
    0.75 * n as f64
}

/// ⟨J^2⟩ inside the symmetric subspace, j(j+1) with j = N/2.
pub fn pss_j_squared(n: usize) -> f64 {
    let j = n as f64 / 2.0;
    j * (j + 1.0)
}

/// Mean entanglement of random permutation-symmetric states, in bits.
pub fn pss_entropy_avg(n: usize, q: usize) -> f64 {
    let (n, q) = (n as f64, q as f64);
    (q + 1.0).log2() - (2.0 / 3.0) * (q + 1.0) / (n - q + 1.0)
}

/// Page value of a Q-qubit block of a random N-qubit state, in bits.
pub fn page_entropy(n: usize, q: usize) -> f64 {
    let (n, q) = (n as f64, q as f64);
    q - std::f64::consts::LN_2.recip() * (q.exp2() / (n - q + 1.0).exp2())
}

/// Parameters of the unkicked (p = 0) disorder average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnkickedParams {
    pub n_qubits: usize,
    pub k: f64,
    pub width: f64,
    pub angles: BlochAngles,
}

impl UnkickedParams {
    pub fn new(n_qubits: usize, k: f64, width: f64, angles: BlochAngles) -> Result<Self> {
        if n_qubits < 2 {
            return invalid("unkicked average needs N >= 2");
        }
        if !(width >= 0.0) || !(k >= 0.0) {
            return invalid("k and w must be >= 0");
        }
        Ok(Self { n_qubits, k, width, angles })
    }

    /// The closed form is only meaningful for N >= 3; N = 2 gets the literal value.
    pub fn in_validity_regime(&self) -> bool {
        self.n_qubits >= 3
    }

    /// cos^2(phi) sin^2(theta): the conserved share of the J_x^2 correlations.
    pub fn x_weight(&self) -> f64 {
        let x = self.angles.unit_vector()[0];
        x * x
    }
}

/// Disorder-averaged ⟨J^2(t)⟩ of the unkicked model started from a coherent state.
pub fn unkicked_j2(t: f64, params: &UnkickedParams) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("time {t} must be >= 0"));
    }
    let n = params.n_qubits as f64;
    let c = params.x_weight();
    let decay = (-(params.width * params.k * t).powi(2) * (n - 2.0) / (n * n)).exp();
    Ok(0.75 * n + n * (n - 1.0) / 4.0 * (c + (1.0 - c) * decay))
}

/// Long-time limit of [`unkicked_j2`] for w > 0.
pub fn unkicked_j2_saturation(params: &UnkickedParams) -> f64 {
    let n = params.n_qubits as f64;
    0.75 * n + n * (n - 1.0) / 4.0 * params.x_weight()
}

/// Heisenberg times (kicks) of the symmetric subspace and the full space.
pub fn heisenberg_times(n: usize) -> (u64, u64) {
    (n as u64 + 1, 1u64 << n)
}

/// sqrt(N) / (w k); +inf when either vanishes.
pub fn saturation_time_estimate(n: usize, k: f64, width: f64) -> Result<f64> {
    if !(k >= 0.0) || !(width >= 0.0) {
        return invalid("k and w must be >= 0");
    }
    if k == 0.0 || width == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((n as f64).sqrt() / (width * k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    /// The ln k - 1 heuristic only holds in the fully chaotic regime k >= 6.
    pub in_validity_regime: bool,
}

pub fn lyapunov_estimate(k: f64) -> Result<LyapunovEstimate> {
    if !(k > 0.0) {
        return invalid("k must be > 0");
    }
    Ok(LyapunovEstimate { value: k.ln() - 1.0, in_validity_regime: k >= 6.0 })
}

/// One point of a classical trajectory started at (theta, phi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortraitPoint {
    pub theta: f64,
    pub phi: f64,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Iterates the classical map from a `grid x grid` lattice of starting points.
pub fn phase_portrait(k: f64, grid: usize, steps: usize) -> Result<Vec<PortraitPoint>> {
    use std::f64::consts::PI;
    if grid == 0 {
        return invalid("grid must be >= 1");
    }
    let mut points = Vec::with_capacity(grid * grid * (steps + 1));
    for i in 0..grid {
        let theta = PI * (i as f64 + 0.5) / grid as f64;
        for j in 0..grid {
            let phi = -PI + 2.0 * PI * (j as f64 + 1.0) / grid as f64;
            let [mut x, mut y, mut z] = BlochAngles::new(theta, phi)?.unit_vector();
            for step in 0..=steps {
                if step > 0 {
                    (x, y, z) = classical_map_step(x, y, z, k)?;
                }
                points.push(PortraitPoint { theta, phi, step, x, y, z });
            }
        }
    }
    Ok(points)
}

/// Writes `theta,phi,step,X,Y,Z`.
pub fn write_portrait_csv<W: Write>(points: &[PortraitPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta,phi,step,X,Y,Z")?;
    for p in points {
        writeln!(out, "{},{},{},{},{},{}", p.theta, p.phi, p.step, p.x, p.y, p.z)?;
    }
    Ok(())
}
