//! Finite-size scaling of ensemble means, y = N^(zeta/nu) F((w - w_c) N^(1/nu)):
//! pairwise curve crossings, a master-curve collapse cost, its minimization and
//! realization-level bootstrap errors.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::mix64;
use crate::ensemble::{AggregateRecord, RunRecord};
use crate::error::{invalid, Error, Result};

/// One ensemble mean at (N, w) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "N")]
    pub n_qubits: usize,
    pub w: f64,
    pub y: f64,
    pub sigma: f64,
}

/// Which time-averaged observable a scaling analysis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    J2,
    Entropy,
}

/// Scaling parameters (w_c, nu, zeta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub w_c: f64,
    pub nu: f64,
    pub zeta: f64,
}

impl ScalingParams {
    pub fn new(w_c: f64, nu: f64, zeta: f64) -> Self {
        Self { w_c, nu, zeta }
    }

    fn to_array(self) -> [f64; 3] {
        [self.w_c, self.nu, self.zeta]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Rescaled coordinates of one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapsedPoint {
    #[serde(rename = "N")]
    pub n_qubits: usize,
    pub x_tilde: f64,
    pub y_tilde: f64,
    pub sigma_tilde: f64,
}

/// x = (w - w_c) N^(1/nu), y / N^(zeta/nu); sigma scales like y.
pub fn rescale(point: &ScalingPoint, params: ScalingParams) -> CollapsedPoint {
    let n = point.n_qubits as f64;
    let yscale = n.powf(params.zeta / params.nu);
    CollapsedPoint {
        n_qubits: point.n_qubits,
        x_tilde: (point.w - params.w_c) * n.powf(1.0 / params.nu),
        y_tilde: point.y / yscale,
        sigma_tilde: point.sigma / yscale,
    }
}

/// Inverse of [`rescale`].
pub fn unscale(point: &CollapsedPoint, params: ScalingParams) -> ScalingPoint {
    let n = point.n_qubits as f64;
    let yscale = n.powf(params.zeta / params.nu);
    ScalingPoint {
        n_qubits: point.n_qubits,
        w: params.w_c + point.x_tilde / n.powf(1.0 / params.nu),
        y: point.y_tilde * yscale,
        sigma: point.sigma_tilde * yscale,
    }
}

/// Groups points by N with each group sorted by w; rejects non-positive sigmas
/// and repeated w within a size.
fn group_by_size(points: &[ScalingPoint]) -> Result<BTreeMap<usize, Vec<ScalingPoint>>> {
    let mut groups: BTreeMap<usize, Vec<ScalingPoint>> = BTreeMap::new();
    for p in points {
        if !(p.sigma > 0.0) || !p.y.is_finite() || !p.w.is_finite() {
            return invalid(format!("point at N = {}, w = {} needs finite y, w and sigma > 0", p.n_qubits, p.w));
        }
        groups.entry(p.n_qubits).or_default().push(*p);
    }
    for (n, g) in groups.iter_mut() {
        g.sort_by(|a, b| a.w.total_cmp(&b.w));
        if g.windows(2).any(|p| p[0].w == p[1].w) {
            return invalid(format!("repeated w at N = {n}"));
        }
    }
    Ok(groups)
}

/// Value of a collapse and how many points took part in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseCost {
    pub cost: f64,
    pub contributing_points: usize,
    pub excluded_points: usize,
}

struct Curves {
    sizes: Vec<Vec<ScalingPoint>>,
}

impl Curves {
    fn new(points: &[ScalingPoint]) -> Result<Self> {
        let groups = group_by_size(points)?;
        if groups.len() < 2 {
            return invalid("collapse needs at least two system sizes");
        }
        if let Some((n, _)) = groups.iter().find(|(_, g)| g.len() < 4) {
            return invalid(format!("collapse needs at least four points at N = {n}"));
        }
        Ok(Self { sizes: groups.into_values().collect() })
    }

    fn total(&self) -> usize {
        self.sizes.iter().map(Vec::len).sum()
    }

    fn cost(&self, params: ScalingParams) -> CollapseCost {
        let rescaled: Vec<Vec<CollapsedPoint>> =
            self.sizes.iter().map(|g| g.iter().map(|p| rescale(p, params)).collect()).collect();
        let mut sum = 0.0;
        let mut terms = 0usize;
        let mut contributing = 0usize;
        for (i, curve) in rescaled.iter().enumerate() {
            for p in curve {
                let mut used = false;
                for (j, other) in rescaled.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    if let Some((y, s2)) = interpolate(other, p.x_tilde) {
                        sum += (p.y_tilde - y).powi(2) / (p.sigma_tilde.powi(2) + s2);
                        terms += 1;
                        used = true;
                    }
                }
                contributing += used as usize;
            }
        }
        CollapseCost {
            cost: if terms == 0 { f64::NAN } else { sum / terms as f64 },
            contributing_points: contributing,
            excluded_points: self.total() - contributing,
        }
    }
}

/// Interpolated (y, sigma^2) of a curve sorted by x, from the three nearest
/// nodes around x (two if that is all there is); None outside its range.
fn interpolate(curve: &[CollapsedPoint], x: f64) -> Option<(f64, f64)> {
    let first = curve.first()?;
    let last = curve.last()?;
    if !(x >= first.x_tilde && x <= last.x_tilde) || curve.len() < 2 {
        return None;
    }
    let hi = curve.partition_point(|p| p.x_tilde < x).clamp(1, curve.len() - 1);
    let nodes = if curve.len() == 2 {
        &curve[..]
    } else if hi == 1 || (hi + 1 < curve.len() && curve[hi + 1].x_tilde - x < x - curve[hi - 2].x_tilde) {
        &curve[hi - 1..hi + 2]
    } else {
        &curve[hi - 2..hi + 1]
    };
    let (mut y, mut s2) = (0.0, 0.0);
    for (i, a) in nodes.iter().enumerate() {
        let weight: f64 = nodes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, b)| (x - b.x_tilde) / (a.x_tilde - b.x_tilde))
            .product();
        y += weight * a.y_tilde;
        s2 += (weight * a.sigma_tilde).powi(2);
    }
    Some((y, s2))
}

/// Mean normalized squared deviation of every point from the interpolated
/// curves of the other sizes, where those curves reach its x.
pub fn collapse_cost(points: &[ScalingPoint], params: ScalingParams) -> Result<CollapseCost> {
    if !(params.nu > 0.0) {
        return invalid("nu must be > 0");
    }
    let c = Curves::new(points)?.cost(params);
    if c.contributing_points == 0 {
        return Err(Error::NoCollapseOverlap);
    }
    Ok(c)
}

/// Bounds of the parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub w_c: [f64; 2],
    pub nu: [f64; 2],
    pub zeta: [f64; 2],
}

impl SearchBox {
    fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("w_c", self.w_c), ("nu", self.nu), ("zeta", self.zeta)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("search bounds for {name} must be finite with lo < hi"));
            }
        }
        if !(self.nu[0] > 0.0) {
            return invalid("nu search range must be > 0");
        }
        Ok(())
    }

    fn lower(&self) -> [f64; 3] {
        [self.w_c[0], self.nu[0], self.zeta[0]]
    }

    fn upper(&self) -> [f64; 3] {
        [self.w_c[1], self.nu[1], self.zeta[1]]
    }
}

/// Tuning of [`fit_collapse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Grid points per axis of the coarse scan.
    pub grid: usize,
    pub max_iterations: usize,
    /// Simplex spread in cost at which the refinement stops.
    pub tolerance: f64,
    /// Minimum share of points that must overlap another size for a
    /// parameter set to count.
    pub min_overlap: f64,
    /// Bootstrap replicas; 0 skips the bootstrap.
    pub bootstrap: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { grid: 21, max_iterations: 2000, tolerance: 1e-10, min_overlap: 0.5, bootstrap: 100 }
    }
}

/// Result of a collapse fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseFit {
    pub w_c: f64,
    pub nu: f64,
    pub zeta: f64,
    pub cost: f64,
    pub excluded_points: usize,
    pub w_c_err: Option<f64>,
    pub nu_err: Option<f64>,
    pub zeta_err: Option<f64>,
    /// Simplex iterations of the refinement.
    pub iterations: usize,
    /// False when the refinement hit `max_iterations`; the parameters are then
    /// the best found so far.
    pub converged: bool,
    /// nu / zeta, close to one when the two exponents agree.
    pub nu_over_zeta: f64,
}

impl CollapseFit {
    pub fn params(&self) -> ScalingParams {
        ScalingParams::new(self.w_c, self.nu, self.zeta)
    }
}

struct Objective<'a> {
    curves: &'a Curves,
    min_contributing: usize,
}

impl Objective<'_> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        if !(x[1] > 0.0) {
            return f64::INFINITY;
        }
        let c = self.curves.cost(ScalingParams::from_array(x));
        if c.contributing_points < self.min_contributing || !c.cost.is_finite() {
            f64::INFINITY
        } else {
            c.cost
        }
    }
}

struct Simplex {
    best: [f64; 3],
    value: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: impl Fn([f64; 3]) -> f64, start: [f64; 3], step: [f64; 3], max_iter: usize, tol: f64) -> Simplex {
    let mut pts: Vec<[f64; 3]> = vec![start];
    for d in 0..3 {
        let mut p = start;
        p[d] += step[d];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[3] - vals[0];
        let size = (1..4).map(|i| (0..3).map(|d| (pts[i][d] - pts[0][d]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if (vals[0].is_finite() && spread.abs() <= tol * (1.0 + vals[0].abs())) || size < 1e-12 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = {
            let mut c = [0.0; 3];
            for p in &pts[..3] {
                for d in 0..3 {
                    c[d] += p[d] / 3.0;
                }
            }
            c
        };
        let along = |t: f64| -> [f64; 3] { std::array::from_fn(|d| centroid[d] + t * (pts[3][d] - centroid[d])) };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                (pts[3], vals[3]) = (expanded, fe);
            } else {
                (pts[3], vals[3]) = (reflected, fr);
            }
            continue;
        }
        if fr < vals[2] {
            (pts[3], vals[3]) = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < vals[3] {
            let c = along(-0.5);
            (c, f(c))
        } else {
            let c = along(0.5);
            (c, f(c))
        };
        if fc < vals[3].min(fr) {
            (pts[3], vals[3]) = (contracted, fc);
            continue;
        }
        let best = pts[0];
        for i in 1..4 {
            pts[i] = std::array::from_fn(|d| best[d] + 0.5 * (pts[i][d] - best[d]));
            vals[i] = f(pts[i]);
        }
    }
    let i = (0..4).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { best: pts[i], value: vals[i], iterations, converged }
}

fn grid_scan(objective: &Objective, bounds: &SearchBox, grid: usize) -> Option<([f64; 3], [f64; 3])> {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let g = grid.max(2);
    let spacing: [f64; 3] = std::array::from_fn(|d| (hi[d] - lo[d]) / (g - 1) as f64);
    let best = (0..g * g * g)
        .into_par_iter()
        .map(|idx| {
            let ijk = [idx / (g * g), (idx / g) % g, idx % g];
            let x: [f64; 3] = std::array::from_fn(|d| lo[d] + ijk[d] as f64 * spacing[d]);
            (objective.eval(x), idx, x)
        })
        .filter(|(v, _, _)| v.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
    Some((best.2, spacing))
}

fn fit_curves(curves: &Curves, bounds: &SearchBox, options: &FitOptions, start: Option<([f64; 3], [f64; 3])>) -> Result<CollapseFit> {
    let objective = Objective { curves, min_contributing: (options.min_overlap * curves.total() as f64).ceil() as usize };
    let (x0, step) = match start {
        Some(s) => s,
        None => grid_scan(&objective, bounds, options.grid).ok_or(Error::NoCollapseOverlap)?,
    };
    let simplex = nelder_mead(|x| objective.eval(x), x0, step, options.max_iterations, options.tolerance);
    if !simplex.value.is_finite() {
        return Err(Error::NoCollapseOverlap);
    }
    let params = ScalingParams::from_array(simplex.best);
    let c = curves.cost(params);
    Ok(CollapseFit {
        w_c: params.w_c,
        nu: params.nu,
        zeta: params.zeta,
        cost: c.cost,
        excluded_points: c.excluded_points,
        w_c_err: None,
        nu_err: None,
        zeta_err: None,
        iterations: simplex.iterations,
        converged: simplex.converged,
        nu_over_zeta: params.nu / params.zeta,
    })
}

/// Coarse grid scan over `bounds` followed by simplex refinement from the best
/// grid point. No bootstrap; see [`fit_collapse_bootstrap`].
pub fn fit_collapse(points: &[ScalingPoint], bounds: &SearchBox, options: &FitOptions) -> Result<CollapseFit> {
    bounds.validate()?;
    let curves = Curves::new(points)?;
    fit_curves(&curves, bounds, options, None)
}

/// Ensemble means and standard errors per (N, w), in order of first appearance.
pub fn points_from_runs(runs: &[RunRecord], observable: Observable) -> Result<Vec<ScalingPoint>> {
    crate::ensemble::aggregate(runs).iter().map(|a| point_from_aggregate(a, observable)).collect()
}

fn point_from_aggregate(a: &AggregateRecord, observable: Observable) -> Result<ScalingPoint> {
    let (y, sigma) = match observable {
        Observable::J2 => (a.j2_mean, a.j2_stderr),
        Observable::Entropy => match (a.s_mean, a.s_stderr) {
            (Some(m), Some(e)) => (m, e),
            _ => return invalid(format!("no entropy recorded at N = {}, w = {}", a.n_qubits, a.w)),
        },
    };
    Ok(ScalingPoint { n_qubits: a.n_qubits, w: a.w, y, sigma })
}

pub fn points_from_aggregates(rows: &[AggregateRecord], observable: Observable) -> Result<Vec<ScalingPoint>> {
    rows.iter().map(|a| point_from_aggregate(a, observable)).collect()
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Fit from realization-level records plus bootstrap errors: every replica
/// resamples the realizations of each (N, w) with replacement, recomputes the
/// means and refits from the central optimum, weighting by the original errors.
pub fn fit_collapse_bootstrap(
    runs: &[RunRecord],
    observable: Observable,
    bounds: &SearchBox,
    options: &FitOptions,
    seed: u64,
) -> Result<CollapseFit> {
    bounds.validate()?;
    let points = points_from_runs(runs, observable)?;
    let curves = Curves::new(&points)?;
    let mut fit = fit_curves(&curves, bounds, options, None)?;
    if options.bootstrap == 0 {
        return Ok(fit);
    }
    let mut groups: Vec<Vec<&RunRecord>> = Vec::new();
    let mut keys: Vec<(usize, u64)> = Vec::new();
    for r in runs {
        let key = (r.n_qubits, r.w.to_bits());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(key);
                groups.push(vec![r]);
            }
        }
    }
    for g in &mut groups {
        g.sort_by_key(|r| r.realization);
    }
    let centre = fit.params().to_array();
    let step: [f64; 3] = {
        let (lo, hi) = (bounds.lower(), bounds.upper());
        std::array::from_fn(|d| (hi[d] - lo[d]) / (options.grid.max(2) - 1) as f64)
    };
    let replicas: Vec<[f64; 3]> = (0..options.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(b)));
            let resampled: Vec<RunRecord> = groups
                .iter()
                .flat_map(|g| {
                    (0..g.len()).map(|i| {
                        let mut r = g[rng.random_range(0..g.len())].clone();
                        r.realization = i as u64;
                        r
                    }).collect::<Vec<_>>()
                })
                .collect();
            let pts: Vec<ScalingPoint> = points_from_runs(&resampled, observable)?
                .into_iter()
                .zip(&points)
                .map(|(p, orig)| ScalingPoint { sigma: orig.sigma, ..p })
                .collect();
            let curves = Curves::new(&pts)?;
            Ok(fit_curves(&curves, bounds, options, Some((centre, step)))?.params().to_array())
        })
        .collect::<Result<_>>()?;
    let column = |d: usize| replicas.iter().map(|r| r[d]).collect::<Vec<_>>();
    if replicas.len() > 1 {
        fit.w_c_err = Some(sample_std(&column(0)));
        fit.nu_err = Some(sample_std(&column(1)));
        fit.zeta_err = Some(sample_std(&column(2)));
    }
    Ok(fit)
}

/// A root of the difference between the rescaled curves of two sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub n_a: usize,
    pub n_b: usize,
    pub w: f64,
}

fn linear_at(curve: &[(f64, f64)], w: f64) -> f64 {
    let hi = curve.partition_point(|p| p.0 < w).clamp(1, curve.len() - 1);
    let (a, b) = (curve[hi - 1], curve[hi]);
    a.1 + (w - a.0) / (b.0 - a.0) * (b.1 - a.1)
}

/// Crossings in w of y / N^(zeta/nu) for every pair of sizes, using
/// piecewise-linear interpolation in w. Pairs without a sign change report none.
pub fn find_crossings(points: &[ScalingPoint], zeta_over_nu: f64) -> Result<Vec<Crossing>> {
    let groups = group_by_size(points)?;
    let curves: Vec<(usize, Vec<(f64, f64)>)> = groups
        .into_iter()
        .filter(|(_, g)| g.len() >= 2)
        .map(|(n, g)| (n, g.iter().map(|p| (p.w, p.y / (n as f64).powf(zeta_over_nu))).collect()))
        .collect();
    let mut out = Vec::new();
    for (i, (na, a)) in curves.iter().enumerate() {
        for (nb, b) in &curves[i + 1..] {
            let lo = a[0].0.max(b[0].0);
            let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
            if lo >= hi {
                continue;
            }
            let mut ws: Vec<f64> = a.iter().chain(b.iter()).map(|p| p.0).filter(|&w| w > lo && w < hi).collect();
            ws.push(lo);
            ws.push(hi);
            ws.sort_by(f64::total_cmp);
            ws.dedup();
            let d: Vec<f64> = ws.iter().map(|&w| linear_at(a, w) - linear_at(b, w)).collect();
            for j in 0..ws.len() {
                if d[j] == 0.0 {
                    out.push(Crossing { n_a: *na, n_b: *nb, w: ws[j] });
                } else if j + 1 < ws.len() && d[j] * d[j + 1] < 0.0 {
                    let t = d[j] / (d[j] - d[j + 1]);
                    out.push(Crossing { n_a: *na, n_b: *nb, w: ws[j] + t * (ws[j + 1] - ws[j]) });
                }
            }
        }
    }
    Ok(out)
}

/// Serialized fit summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub observable: Observable,
    pub w_c: f64,
    pub nu: f64,
    pub zeta: f64,
    pub cost: f64,
    pub w_c_err: Option<f64>,
    pub nu_err: Option<f64>,
    pub zeta_err: Option<f64>,
    pub excluded_points: usize,
    pub converged: bool,
    pub iterations: usize,
    pub nu_over_zeta: f64,
    pub crossings: Vec<Crossing>,
}

impl FitReport {
    pub fn new(observable: Observable, fit: &CollapseFit, crossings: Vec<Crossing>) -> Self {
        Self {
            observable,
            w_c: fit.w_c,
            nu: fit.nu,
            zeta: fit.zeta,
            cost: fit.cost,
            w_c_err: fit.w_c_err,
            nu_err: fit.nu_err,
            zeta_err: fit.zeta_err,
            excluded_points: fit.excluded_points,
            converged: fit.converged,
            iterations: fit.iterations,
            nu_over_zeta: fit.nu_over_zeta,
            crossings,
        }
    }
}

/// Writes `N,x_tilde,y_tilde,sigma_tilde`.
pub fn write_collapsed_csv<W: Write>(points: &[ScalingPoint], params: ScalingParams, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for p in points {
        writer.serialize(rescale(p, params))?;
    }
    writer.flush()?;
    Ok(())
}
