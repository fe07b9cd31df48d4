//! Aggregation over trajectory ensembles.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms::two_component_trajectory;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, CatParams, FockVector};
use crate::phase_space::coherence_factor;
use crate::stats::{Histogram, Summary};
use crate::trajectory::{run_trajectory, TrajectoryRecord};

/// Trajectory propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Fock,
    TwoComponent,
    ChargeSde,
}

impl Engine {
    pub fn run(self, cfg: &SimConfig, index: u64) -> Result<TrajectoryRecord> {
        match self {
            Engine::Fock => run_trajectory(cfg, index),
            Engine::TwoComponent => two_component_trajectory(cfg, index),
            Engine::ChargeSde => crate::closed_forms::charge_sde_trajectory(cfg, index),
        }
    }
}

/// Runs trajectories `0..cfg.n_traj` in parallel and maps each record through
/// `reduce`; the output is in index order regardless of scheduling.
pub fn run_ensemble<T: Send>(
    cfg: &SimConfig,
    engine: Engine,
    reduce: impl Fn(TrajectoryRecord) -> T + Sync + Send,
) -> Result<Vec<T>> {
    cfg.validate()?;
    (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|k| engine.run(cfg, k).map(&reduce))
        .collect()
}

/// Click and charge data needed by the histogram estimators.
pub trait EventRecord {
    fn click_times(&self) -> &[f64];
    fn click_charges(&self) -> &[f64];
    fn final_charge(&self) -> f64;
}

impl EventRecord for TrajectoryRecord {
    fn click_times(&self) -> &[f64] {
        &self.click_times
    }
    fn click_charges(&self) -> &[f64] {
        &self.click_charges
    }
    fn final_charge(&self) -> f64 {
        self.final_charge
    }
}

/// Per-trajectory event summary kept for every member of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: u64,
    pub click_times: Vec<f64>,
    pub click_charges: Vec<f64>,
    pub final_charge: f64,
}

impl From<&TrajectoryRecord> for TrajectorySummary {
    fn from(r: &TrajectoryRecord) -> Self {
        Self {
            index: r.index,
            click_times: r.click_times.clone(),
            click_charges: r.click_charges.clone(),
            final_charge: r.final_charge,
        }
    }
}

impl EventRecord for TrajectorySummary {
    fn click_times(&self) -> &[f64] {
        &self.click_times
    }
    fn click_charges(&self) -> &[f64] {
        &self.click_charges
    }
    fn final_charge(&self) -> f64 {
        self.final_charge
    }
}

/// Event at which the charge is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeEvent {
    Final,
    /// The k-th click, counting from 1.
    Click(usize),
}

impl ChargeEvent {
    pub const FIRST_CLICK: ChargeEvent = ChargeEvent::Click(1);
}

/// Charges at `event`, with the number of records lacking it.
pub fn charges_at<R: EventRecord>(records: &[R], event: ChargeEvent) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        match event {
            ChargeEvent::Final => out.push(r.final_charge()),
            ChargeEvent::Click(k) => {
                if let Some(&q) = r.click_charges().get(k.saturating_sub(1)) {
                    out.push(q);
                }
            }
        }
    }
    let skipped = records.len() - out.len();
    (out, skipped)
}

/// Delay before click `k` (from `t = 0` for `k = 1`, else from click `k - 1`).
pub fn waiting_times<R: EventRecord>(records: &[R], k: usize) -> (Vec<f64>, usize) {
    assert!(k >= 1, "clicks are counted from 1");
    let out: Vec<f64> = records
        .iter()
        .filter_map(|r| {
            let t = r.click_times();
            let end = *t.get(k - 1)?;
            Some(if k == 1 { end } else { end - t[k - 2] })
        })
        .collect();
    let skipped = records.len() - out.len();
    (out, skipped)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// `bins` equal bins spanning the data.
    Spanning { bins: usize },
    Fixed { lo: f64, width: f64, bins: usize },
}

fn bin(samples: &[f64], binning: Binning, skipped: usize) -> Histogram {
    match binning {
        Binning::Spanning { bins } => Histogram::spanning(samples, bins, skipped),
        Binning::Fixed { lo, width, bins } => Histogram::fixed(samples, lo, width, bins, skipped),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickStatistics {
    pub histogram: Histogram,
    pub summary: Summary,
}

pub fn click_histogram<R: EventRecord>(records: &[R]) -> ClickStatistics {
    let counts: Vec<usize> = records.iter().map(|r| r.click_times().len()).collect();
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    ClickStatistics {
        histogram: Histogram::integers(&counts, 0),
        summary: Summary::of(&values),
    }
}

pub fn charge_histogram<R: EventRecord>(records: &[R], event: ChargeEvent, binning: Binning) -> Histogram {
    let (samples, skipped) = charges_at(records, event);
    bin(&samples, binning, skipped)
}

/// Waiting times before click `k` in bins of `width` starting at zero.
pub fn waiting_time_histogram<R: EventRecord>(records: &[R], k: usize, width: f64) -> Histogram {
    let (samples, skipped) = waiting_times(records, k);
    let max = samples.iter().copied().fold(0.0, f64::max);
    let bins = ((max / width).floor() as usize) + 1;
    Histogram::fixed(&samples, 0.0, width, bins, skipped)
}

/// Series averaged around clicks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Conditioned quadrature scaled by `2 sqrt(2 kappa (1 - r))`.
    Quadrature,
    /// Filtered photocurrent.
    Photocurrent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub tau_grid: Vec<f64>,
    pub h: Vec<f64>,
    /// Standard error of `h` from the spread over click windows.
    pub sem: Vec<f64>,
    /// Windows contributing at each delay.
    pub counts: Vec<usize>,
    pub h0: f64,
    /// Number of clicks used as window centres.
    pub n_starts: usize,
}

impl CorrelationEstimate {
    /// `h(tau) / h(0)`.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        if self.h0 == 0.0 || !self.h0.is_finite() {
            return Err(Error::Domain(format!("zero-delay value {} cannot normalize", self.h0)));
        }
        Ok(self.h.iter().map(|h| h / self.h0).collect())
    }
}

/// Running sums behind [`intensity_field_h`], so that records can be folded in
/// one at a time and partial results merged.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationAccumulator {
    mode: CorrelationMode,
    spacing: f64,
    half: i64,
    scale: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    counts: Vec<usize>,
    n_starts: usize,
}

impl CorrelationAccumulator {
    /// Windows of half-width `window` on a record grid of the given spacing.
    pub fn new(mode: CorrelationMode, window: f64, spacing: f64, cfg: &SimConfig) -> Self {
        let half = (window / spacing).round() as i64;
        let width = (2 * half + 1) as usize;
        let scale = match mode {
            CorrelationMode::Quadrature => 2.0 * cfg.homodyne_gain(),
            CorrelationMode::Photocurrent => 1.0,
        };
        Self {
            mode,
            spacing,
            half,
            scale,
            sum: vec![0.0; width],
            sum_sq: vec![0.0; width],
            counts: vec![0; width],
            n_starts: 0,
        }
    }

    pub fn add(&mut self, r: &TrajectoryRecord) {
        let series = match self.mode {
            CorrelationMode::Quadrature => &r.quad_series,
            CorrelationMode::Photocurrent => &r.i_series,
        };
        let uniform = uniform_prefix(&r.t_grid, self.spacing) as i64;
        let centres: Vec<i64> = r.click_times.iter().map(|&tc| (tc / self.spacing).round() as i64).collect();
        self.n_starts += centres.len();
        // Values within one record are summed in sorted order so that the
        // estimate does not depend on the order of the clicks.
        let mut slot_values = Vec::with_capacity(centres.len());
        for j in -self.half..=self.half {
            slot_values.clear();
            slot_values.extend(
                centres
                    .iter()
                    .map(|c| c + j)
                    .filter(|&at| at >= 0 && at < uniform)
                    .map(|at| self.scale * series[at as usize]),
            );
            if slot_values.is_empty() {
                continue;
            }
            slot_values.sort_by(f64::total_cmp);
            let slot = (j + self.half) as usize;
            self.sum[slot] += slot_values.iter().sum::<f64>();
            self.sum_sq[slot] += slot_values.iter().map(|v| v * v).sum::<f64>();
            self.counts[slot] += slot_values.len();
        }
    }

    /// Adds the sums of `other`, which must share mode, window and spacing.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.sum.len(), other.sum.len(), "merging accumulators of different windows");
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
            self.counts[k] += other.counts[k];
        }
        self.n_starts += other.n_starts;
    }

    pub fn finish(&self) -> Result<CorrelationEstimate> {
        if self.n_starts == 0 {
            return Err(Error::NoClicks);
        }
        let width = self.sum.len();
        let mut h = vec![f64::NAN; width];
        let mut sem = vec![f64::NAN; width];
        for k in 0..width {
            let n = self.counts[k] as f64;
            if self.counts[k] > 0 {
                h[k] = self.sum[k] / n;
            }
            if self.counts[k] > 1 {
                let var = ((self.sum_sq[k] - n * h[k] * h[k]) / (n - 1.0)).max(0.0);
                sem[k] = (var / n).sqrt();
            }
        }
        Ok(CorrelationEstimate {
            tau_grid: (-self.half..=self.half).map(|j| j as f64 * self.spacing).collect(),
            h0: h[self.half as usize],
            h,
            sem,
            counts: self.counts.clone(),
            n_starts: self.n_starts,
        })
    }
}

/// Grid spacing of the first record with at least two grid points.
pub fn record_spacing(records: &[TrajectoryRecord]) -> Option<f64> {
    records.iter().find(|r| r.t_grid.len() >= 2).map(|r| r.t_grid[1] - r.t_grid[0])
}

/// Averages the chosen series over windows of half-width `window` centred
/// on every click. Windows are clipped at the record ends; each delay is
/// averaged over the windows that reach it.
pub fn intensity_field_h(
    records: &[TrajectoryRecord],
    mode: CorrelationMode,
    window: f64,
    cfg: &SimConfig,
) -> Result<CorrelationEstimate> {
    let spacing = record_spacing(records).ok_or(Error::NoClicks)?;
    let mut acc = CorrelationAccumulator::new(mode, window, spacing, cfg);
    for r in records {
        acc.add(r);
    }
    acc.finish()
}

/// Length of the leading part of `t_grid` that lies on multiples of `spacing`.
fn uniform_prefix(t_grid: &[f64], spacing: f64) -> usize {
    let n = t_grid.len();
    match t_grid.last() {
        Some(&last) if ((last / spacing) - (n - 1) as f64).abs() > 1e-6 => n - 1,
        _ => n,
    }
}

/// Complex Hermitian matrix in the number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        sym.symmetric_eigenvalues().min()
    }

    pub fn photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.matrix[(n, n)].re).sum()
    }

    /// `<u|rho|v>`
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let d = self.dim();
        let mut total = C64::new(0.0, 0.0);
        for i in 0..d.min(u.len()) {
            let row: C64 = (0..d.min(v.len())).map(|j| self.matrix[(i, j)] * v[j]).sum();
            total += u[i].conj() * row;
        }
        total
    }
}

/// Equal-weight mixture `(1/K) sum |psi_k><psi_k|`.
///
/// States are accumulated in a canonical order, so any permutation of the
/// input gives a bitwise-identical matrix.
pub fn reconstruct_rho(states: &[FockVector]) -> Result<DensityMatrix> {
    let dim = states.iter().map(|s| s.amplitudes().len()).max().ok_or(Error::NoClicks)?;
    let mut order: Vec<&FockVector> = states.iter().collect();
    order.sort_by(|a, b| canonical_cmp(a.amplitudes(), b.amplitudes()));
    let mut acc = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for s in order {
        let a = s.amplitudes();
        let len = a.iter().rposition(|c| c.norm_sqr() > 0.0).map_or(0, |k| k + 1);
        for i in 0..len {
            let ai = a[i];
            let row = &mut acc[i];
            for j in 0..len {
                row[j] += ai * a[j].conj();
            }
        }
    }
    let inv = 1.0 / states.len() as f64;
    let matrix = DMatrix::from_fn(dim, dim, |i, j| acc[i][j] * inv);
    Ok(DensityMatrix { matrix })
}

fn canonical_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    let key = |c: &C64| (c.re.to_bits(), c.im.to_bits());
    a.iter().map(key).cmp(b.iter().map(key))
}

/// Stored states of `records` at the snapshot nearest `t`, in number basis.
pub fn snapshot_states(records: &[TrajectoryRecord], t: f64, truncation: usize) -> Result<Vec<FockVector>> {
    records
        .iter()
        .map(|r| {
            let snap = r
                .snapshots
                .iter()
                .filter(|s| s.after_click.is_none())
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                .ok_or_else(|| Error::config("snapshot_times", format!("record {} has no snapshot near {t}", r.index)))?;
            snap.state.to_fock(truncation)
        })
        .collect()
}

/// Weight of the `|+A(t)><-A(t)|` term relative to the initial cat.
///
/// A state or mixture supported on `|+-A(t)>` is written as
/// `sum_ij M_ij |i><j|` with `M = G^{-1} R G^{-1}`, where `G` is the Gram
/// matrix and `R_ij = <i|rho|j>`. The weight is
/// `2 (1 + cos(phi0) e^{-2A^2}) Re(M_{+-} e^{i phi0})`, which equals the
/// fringe factor of the unconditioned Wigner function.
pub struct InterferenceProjector {
    plus: Vec<C64>,
    minus: Vec<C64>,
    gram_inv: [[C64; 2]; 2],
    phase: C64,
    scale: f64,
}

impl InterferenceProjector {
    pub fn new(params: &CatParams, kappa: f64, t: f64, truncation: usize) -> Self {
        let a = params.amplitude * (-kappa * t).exp();
        let plus = coherent_amplitudes(C64::new(a, 0.0), truncation);
        let minus = coherent_amplitudes(C64::new(-a, 0.0), truncation);
        let dot = |u: &[C64], v: &[C64]| -> C64 { u.iter().zip(v).map(|(x, y)| x.conj() * y).sum() };
        let g = [[dot(&plus, &plus), dot(&plus, &minus)], [dot(&minus, &plus), dot(&minus, &minus)]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let gram_inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        Self {
            plus,
            minus,
            gram_inv,
            phase: C64::from_polar(1.0, params.phi0),
            scale: 2.0 * params.norm_factor(),
        }
    }

    fn weight_from(&self, r: [[C64; 2]; 2]) -> f64 {
        let gi = &self.gram_inv;
        let mut m01 = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                m01 += gi[0][i] * r[i][j] * gi[j][1];
            }
        }
        self.scale * (m01 * self.phase).re
    }

    pub fn state_weight(&self, state: &FockVector) -> f64 {
        let amps = state.amplitudes();
        let proj = |u: &[C64]| -> C64 { u.iter().zip(amps).map(|(x, y)| x.conj() * y).sum() };
        let v = [proj(&self.plus), proj(&self.minus)];
        self.weight_from([[v[0] * v[0].conj(), v[0] * v[1].conj()], [v[1] * v[0].conj(), v[1] * v[1].conj()]])
    }

    pub fn mixture_weight(&self, rho: &DensityMatrix) -> f64 {
        let u = [&self.plus, &self.minus];
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = rho.sandwich(u[i], u[j]);
            }
        }
        self.weight_from(r)
    }
}

/// Unconditioned means from the master equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeReference {
    pub photon_number: f64,
    pub quad_mean: f64,
    pub coherence_factor: f64,
}

/// `nbar(0) e^{-2 kappa t}`, the mean quadrature, and the fringe factor
/// `exp[-2 A^2 (1 - e^{-2 kappa t})]`.
pub fn me_reference(params: &CatParams, kappa: f64, theta: f64, t: f64) -> MeReference {
    let a = params.amplitude;
    let e = (-2.0 * a * a).exp();
    let quad0 = -a * e * params.phi0.sin() * theta.sin() / params.norm_factor();
    MeReference {
        photon_number: params.mean_photon_number() * (-2.0 * kappa * t).exp(),
        quad_mean: quad0 * (-kappa * t).exp(),
        coherence_factor: coherence_factor(a, kappa, t),
    }
}

/// Decoherence time `1 / (2 kappa A^2)`.
pub fn decoherence_time(amplitude: f64, kappa: f64) -> f64 {
    1.0 / (2.0 * kappa * amplitude * amplitude)
}

/// Time `ln(2 A^2) / (2 kappa)` at which the quadrature potential develops wells.
pub fn modulation_onset(amplitude: f64, kappa: f64) -> f64 {
    (2.0 * amplitude * amplitude).ln() / (2.0 * kappa)
}
