//! Quenched-disorder ensembles: per-realization long-time averages, their
//! statistics across realizations, and the CSV files that carry them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, FloquetParams, FloquetPropagator, RecordSchedule};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{coherent_state, BlochAngles, MAX_QUBITS};
use crate::observables::ObservableSample;

/// Refuse sweeps whose in-flight state vectors would exceed this many bytes.
pub const MEMORY_BUDGET_BYTES: u64 = 16 << 30;

/// Complex vectors of length 2^N alive per worker: state, diagonal, scratch.
const VECTORS_PER_WORKER: u64 = 3;

/// Everything that determines a sweep. Output is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub w_grid: Vec<f64>,
    pub k: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub theta: f64,
    pub phi: f64,
    pub realizations: usize,
    pub n_max: u64,
    /// Averaging window [n1, n2], inclusive.
    pub window: [u64; 2],
    /// Kicks between recorded observable samples inside the window.
    pub obs_stride: u64,
    /// Kicks between entropy evaluations; a multiple of `obs_stride`, 0 disables.
    pub entropy_stride: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_p() -> f64 {
    std::f64::consts::FRAC_PI_2
}

impl SweepConfig {
    /// Desk-scale defaults: 2e4 kicks, window [5e3, 2e4], 50 realizations.
    pub fn desk(n_list: Vec<usize>, w_grid: Vec<f64>, k: f64) -> Self {
        Self {
            n_list,
            w_grid,
            k,
            p: default_p(),
            theta: 2.25,
            phi: 1.1,
            realizations: 50,
            n_max: 20_000,
            window: [5_000, 20_000],
            obs_stride: 10,
            entropy_stride: 100,
            master_seed: 2024,
            output: None,
        }
    }

    /// Long-run preset: 3e5 kicks averaged over [1e5, 3e5], 100 realizations.
    pub fn paper_scale(n_list: Vec<usize>, w_grid: Vec<f64>, k: f64) -> Self {
        Self {
            realizations: 100,
            n_max: 300_000,
            window: [100_000, 300_000],
            obs_stride: 100,
            entropy_stride: 1_000,
            ..Self::desk(n_list, w_grid, k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return invalid("n_list is empty");
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| !(2..=MAX_QUBITS).contains(&n)) {
            return Err(Error::Size(n));
        }
        if self.w_grid.is_empty() {
            return invalid("w_grid is empty");
        }
        if self.w_grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("disorder widths must be finite and >= 0");
        }
        if !(self.k.is_finite() && self.k >= 0.0) || !self.p.is_finite() {
            return invalid("k must be finite and >= 0, p finite");
        }
        BlochAngles::new(self.theta, self.phi)?;
        if self.realizations == 0 {
            return invalid("realizations must be >= 1");
        }
        let [n1, n2] = self.window;
        if !(n1 < n2 && n2 <= self.n_max) {
            return invalid(format!("window [{n1}, {n2}] must satisfy n1 < n2 <= n_max = {}", self.n_max));
        }
        if self.obs_stride == 0 {
            return invalid("obs_stride must be >= 1");
        }
        if self.entropy_stride % self.obs_stride != 0 {
            return invalid("entropy_stride must be a multiple of obs_stride");
        }
        Ok(())
    }

    pub fn angles(&self) -> Result<BlochAngles> {
        BlochAngles::new(self.theta, self.phi)
    }

    fn schedule(&self, n: usize) -> Result<RecordSchedule> {
        let [n1, n2] = self.window;
        RecordSchedule::strided(n1, n2, self.obs_stride, self.entropy_stride / self.obs_stride, n / 2)
    }

    fn check_capacity(&self) -> Result<()> {
        let workers = rayon::current_num_threads() as u64;
        for &n in &self.n_list {
            let bytes = workers * VECTORS_PER_WORKER * 16 * (1u64 << n);
            if bytes > MEMORY_BUDGET_BYTES {
                return Err(Error::Capacity(n));
            }
        }
        Ok(())
    }
}

/// Long-time averages of one disorder realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "N")]
    pub n_qubits: usize,
    pub w: f64,
    pub k: f64,
    pub theta: f64,
    pub phi: f64,
    pub realization: u64,
    pub seed: u64,
    pub j2_bar: f64,
    pub s_half_bar: Option<f64>,
    pub pss_weight_bar: f64,
    #[serde(skip)]
    pub trace: Option<Vec<ObservableSample>>,
}

/// Statistics of the time averages across realizations at one (N, w).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    #[serde(rename = "N")]
    pub n_qubits: usize,
    pub w: f64,
    pub k: f64,
    pub j2_mean: f64,
    /// Sample standard deviation / sqrt(R); 0 for a single realization.
    pub j2_stderr: f64,
    /// Mean squared deviation of the time averages (1/R normalization).
    pub j2_var: f64,
    pub s_mean: Option<f64>,
    pub s_stderr: Option<f64>,
    #[serde(rename = "R")]
    pub realizations: usize,
}

/// Window means of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowAverages {
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub j2: f64,
    pub entropy: Option<f64>,
    pub pss_weight: f64,
    pub samples: usize,
}

/// Mean of f over [first, last] of a recorded sequence, trapezoidal in n.
fn trapezoid_mean(points: &[(u64, f64)]) -> f64 {
    match points {
        [] => f64::NAN,
        [(_, y)] => *y,
        _ => {
            let span = (points[points.len() - 1].0 - points[0].0) as f64;
            let area: f64 = points.windows(2).map(|p| 0.5 * (p[1].0 - p[0].0) as f64 * (p[0].1 + p[1].1)).sum();
            area / span
        }
    }
}

/// Time averages over the samples with n in [n1, n2].
pub fn time_average(samples: &[ObservableSample], n1: u64, n2: u64) -> Result<WindowAverages> {
    let inside: Vec<&ObservableSample> = samples.iter().filter(|s| s.n >= n1 && s.n <= n2).collect();
    if inside.is_empty() {
        return invalid(format!("no samples inside the averaging window [{n1}, {n2}]"));
    }
    let mean_of = |f: fn(&ObservableSample) -> f64| {
        let pts: Vec<(u64, f64)> = inside.iter().map(|s| (s.n, f(s))).collect();
        trapezoid_mean(&pts)
    };
    let entropy_pts: Vec<(u64, f64)> = inside.iter().filter_map(|s| s.entropy_q.map(|e| (s.n, e))).collect();
    Ok(WindowAverages {
        jx2: mean_of(|s| s.jx2),
        jy2: mean_of(|s| s.jy2),
        jz2: mean_of(|s| s.jz2),
        j2: mean_of(|s| s.j2),
        entropy: (!entropy_pts.is_empty()).then(|| trapezoid_mean(&entropy_pts)),
        pss_weight: mean_of(|s| s.pss_weight),
        samples: inside.len(),
    })
}

fn simulate(config: &SweepConfig, n: usize, w: f64, realization: u64, schedule: &RecordSchedule) -> Result<(u64, Vec<ObservableSample>)> {
    let seed = dynamics::realization_seed(config.master_seed, n, w, realization);
    let disorder = dynamics::sample_disorder(n, w, seed)?;
    let params = FloquetParams::new(n, config.k, config.p)?;
    let propagator = FloquetPropagator::from_disorder(&params, &disorder)?;
    let initial = coherent_state(n, config.angles()?)?;
    Ok((seed, dynamics::evolve_with(&propagator, &initial, config.n_max, schedule)?))
}

fn record(config: &SweepConfig, n: usize, w: f64, realization: u64, seed: u64, samples: &[ObservableSample]) -> Result<RunRecord> {
    let [n1, n2] = config.window;
    let avg = time_average(samples, n1, n2)?;
    Ok(RunRecord {
        n_qubits: n,
        w,
        k: config.k,
        theta: config.theta,
        phi: config.phi,
        realization,
        seed,
        j2_bar: avg.j2,
        s_half_bar: avg.entropy,
        pss_weight_bar: avg.pss_weight,
        trace: None,
    })
}

/// Evolves one realization for `n_max` kicks and averages over the window.
pub fn run_realization(config: &SweepConfig, n: usize, w: f64, realization: u64) -> Result<RunRecord> {
    config.validate()?;
    let (seed, samples) = simulate(config, n, w, realization, &config.schedule(n)?)?;
    record(config, n, w, realization, seed, &samples)
}

/// Like [`run_realization`] but records the whole trajectory on a log-spaced
/// schedule (in addition to the window) and keeps it as the trace.
pub fn run_realization_traced(config: &SweepConfig, n: usize, w: f64, realization: u64) -> Result<RunRecord> {
    config.validate()?;
    let window = config.schedule(n)?;
    let log = RecordSchedule::log_spaced(config.n_max, 10, n / 2);
    let entropy: Vec<u64> = window
        .kicks()
        .iter()
        .enumerate()
        .filter(|(i, _)| window.records_entropy_at(*i))
        .map(|(_, &k)| k)
        .chain(
            log.kicks()
                .iter()
                .enumerate()
                .filter(|(i, k)| log.records_entropy_at(*i) && window.kicks().binary_search(k).is_err())
                .map(|(_, &k)| k),
        )
        .collect();
    let kicks: Vec<u64> = window.kicks().iter().chain(log.kicks()).copied().collect();
    let schedule = RecordSchedule::new(kicks, &entropy, n / 2)?;
    let (seed, samples) = simulate(config, n, w, realization, &schedule)?;
    let in_window: Vec<ObservableSample> =
        samples.iter().filter(|s| window.kicks().binary_search(&s.n).is_ok()).cloned().collect();
    let mut rec = record(config, n, w, realization, seed, &in_window)?;
    rec.trace = Some(samples);
    Ok(rec)
}

fn mean_and_spread(values: &[f64]) -> (f64, f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let stderr = if values.len() > 1 { (ss / (r - 1.0)).sqrt() / r.sqrt() } else { 0.0 };
    (mean, stderr, ss / r)
}

/// Groups runs by (N, w) in order of first appearance and reduces each group
/// in realization order.
pub fn aggregate(runs: &[RunRecord]) -> Vec<AggregateRecord> {
    let mut keys: Vec<(usize, u64)> = Vec::new();
    for r in runs {
        let key = (r.n_qubits, r.w.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(n, wbits)| {
            let mut group: Vec<&RunRecord> = runs.iter().filter(|r| r.n_qubits == n && r.w.to_bits() == wbits).collect();
            group.sort_by_key(|r| r.realization);
            let j2: Vec<f64> = group.iter().map(|r| r.j2_bar).collect();
            let (j2_mean, j2_stderr, j2_var) = mean_and_spread(&j2);
            let s: Option<Vec<f64>> = group.iter().map(|r| r.s_half_bar).collect();
            let (s_mean, s_stderr) = match s {
                Some(s) if !s.is_empty() => {
                    let (m, e, _) = mean_and_spread(&s);
                    (Some(m), Some(e))
                }
                _ => (None, None),
            };
            AggregateRecord {
                n_qubits: n,
                w: f64::from_bits(wbits),
                k: group[0].k,
                j2_mean,
                j2_stderr,
                j2_var,
                s_mean,
                s_stderr,
                realizations: group.len(),
            }
        })
        .collect()
}

/// Runs and their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// All realizations at every (N, w), in parallel on the current rayon pool.
/// Any failed realization aborts the sweep.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    config.check_capacity()?;
    let mut jobs = Vec::new();
    for &n in &config.n_list {
        for &w in &config.w_grid {
            for r in 0..config.realizations as u64 {
                jobs.push((n, w, r));
            }
        }
    }
    // Largest systems first so the pool does not idle on a long tail.
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(jobs[i].0));
    let mut finished: Vec<(usize, RunRecord)> = order
        .into_par_iter()
        .map(|i| {
            let (n, w, r) = jobs[i];
            run_realization(config, n, w, r).map(|rec| (i, rec))
        })
        .collect::<Result<_>>()?;
    finished.sort_by_key(|(i, _)| *i);
    let runs: Vec<RunRecord> = finished.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(&runs);
    Ok(SweepOutput { runs, aggregates })
}

pub const RUNS_HEADER: &str = "N,w,k,theta,phi,realization,seed,j2_bar,s_half_bar,pss_weight_bar";
pub const AGGREGATE_HEADER: &str = "N,w,k,j2_mean,j2_stderr,j2_var,s_mean,s_stderr,R";
pub const TRAJECTORY_HEADER: &str = "n,jx2,jy2,jz2,j2,s_q,pss_weight";

fn write_rows<T: Serialize, W: Write>(rows: &[T], header: &str, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(header.split(','))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: std::io::Read>(input: R, header: &str) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(input);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if found.join(",") != header {
        return invalid(format!("unexpected CSV header `{}`, expected `{header}`", found.join(",")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_runs_csv<W: Write>(runs: &[RunRecord], out: W) -> Result<()> {
    write_rows(runs, RUNS_HEADER, out)
}

pub fn read_runs_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>> {
    read_rows(input, RUNS_HEADER)
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRecord], out: W) -> Result<()> {
    write_rows(rows, AGGREGATE_HEADER, out)
}

pub fn read_aggregate_csv<R: std::io::Read>(input: R) -> Result<Vec<AggregateRecord>> {
    read_rows(input, AGGREGATE_HEADER)
}

#[derive(Serialize)]
struct TrajectoryRow {
    n: u64,
    jx2: f64,
    jy2: f64,
    jz2: f64,
    j2: f64,
    s_q: Option<f64>,
    pss_weight: f64,
}

pub fn write_trajectory_csv<W: Write>(samples: &[ObservableSample], out: W) -> Result<()> {
    let rows: Vec<TrajectoryRow> = samples
        .iter()
        .map(|s| TrajectoryRow { n: s.n, jx2: s.jx2, jy2: s.jy2, jz2: s.jz2, j2: s.j2, s_q: s.entropy_q, pss_weight: s.pss_weight })
        .collect();
    write_rows(&rows, TRAJECTORY_HEADER, out)
}

/// Writes `dest` through a `.partial` sibling so a crash never leaves a
/// complete-looking file behind.
pub fn write_atomically(dest: &Path, contents: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut partial = dest.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let result = fs::File::create(&partial).map_err(Error::from).and_then(|mut f| {
        contents(&mut f)?;
        f.sync_all()?;
        Ok(())
    });
    match result {
        Ok(()) => Ok(fs::rename(&partial, dest)?),
        Err(e) => {
            let _ = fs::remove_file(&partial);
            Err(e)
        }
    }
}

/// Writes `runs.csv` and `aggregate.csv` into `dir`.
pub fn write_sweep(output: &SweepOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomically(&dir.join("runs.csv"), |f| write_runs_csv(&output.runs, f))?;
    write_atomically(&dir.join("aggregate.csv"), |f| write_aggregate_csv(&output.aggregates, f))
}
