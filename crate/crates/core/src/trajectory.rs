//! Single realizations of the trigger + homodyne unraveling.
//!
//! Each step draws one uniform number; if it falls below the trigger
//! probability the state is collapsed with `a`, otherwise one Gaussian
//! increment drives the homodyne update. Both branches then apply the
//! no-jump damping `exp(-kappa a^dag a dt)` and renormalize.
//!
//! The homodyne update uses the exact propagator `exp(s a)` with
//! `s = sqrt(2 kappa (1 - r)) e^{-i theta} dxi` instead of a first-order
//! expansion. The Ito correction it omits is proportional to `a^2 dt`, which
//! acts identically on both cat components and is removed by normalization, so
//! the conditioned state matches the two-component closed form driven by the
//! same charge record to round-off.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::closed_forms::TwoComponentState;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fock::{
    self, cat_state, damp_in_place, exp_lowering_in_place, lower_in_place, raw_moments,
    Expectations, FockVector,
};
use crate::rng::{self, TrajectoryRng};

/// Populations below this are dropped from the top of the active Fock range.
const TRIM_THRESHOLD: f64 = 1e-32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepIncrement {
    /// Wiener increment with variance `dt`.
    pub dw: f64,
    /// Normalized charge increment: drift plus `dw`.
    pub dxi: f64,
    /// Mode-weighted increment `e^{-kappa t} dxi`.
    pub dq_norm: f64,
}

/// Conditioned state stored in a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CavityState {
    Fock(FockVector),
    TwoComponent(TwoComponentState),
}

impl CavityState {
    /// Number-basis amplitudes, expanding a two-component state if needed.
    pub fn to_fock(&self, truncation: usize) -> Result<FockVector> {
        match self {
            CavityState::Fock(v) => Ok(v.clone()),
            CavityState::TwoComponent(s) => s.to_fock(truncation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Set when the snapshot was taken right after the given click (1-based).
    pub after_click: Option<usize>,
    pub state: CavityState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    pub click_times: Vec<f64>,
    /// Cumulative charge at each click.
    pub click_charges: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub q_series: Vec<f64>,
    pub i_series: Vec<f64>,
    pub n_series: Vec<f64>,
    pub quad_series: Vec<f64>,
    pub steps: usize,
    pub gaussian_draws: usize,
    pub final_charge: f64,
    pub final_state: CavityState,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryRecord {
    pub fn n_clicks(&self) -> usize {
        self.click_times.len()
    }

    /// Mirror image in time: series reversed, click `t` mapped to `T - t`.
    ///
    /// Only the series and click lists are meaningful in the result.
    pub fn time_reversed(&self) -> Self {
        let end = self.t_grid.last().copied().unwrap_or(0.0);
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        Self {
            click_times: self.click_times.iter().rev().map(|t| end - t).collect(),
            click_charges: rev(&self.click_charges),
            q_series: rev(&self.q_series),
            i_series: rev(&self.i_series),
            n_series: rev(&self.n_series),
            quad_series: rev(&self.quad_series),
            ..self.clone()
        }
    }
}

/// `2 kappa r <a^dag a> dt` for a possibly un-normalized state.
pub fn trigger_probability(state: &FockVector, cfg: &SimConfig) -> Result<f64> {
    let n2 = state.norm_sqr();
    if !(n2 >= 1e-300) {
        return Err(Error::ZeroNorm(n2));
    }
    let m = raw_moments(state.amplitudes(), cfg.theta, n2);
    Ok(2.0 * cfg.kappa * cfg.r * m.photon_number * cfg.dt)
}

/// Homodyne increment for a no-click step starting at time `t`.
pub fn homodyne_increment(moments: &Expectations, dw: f64, t: f64, cfg: &SimConfig) -> StepIncrement {
    let gain = cfg.homodyne_gain();
    let dxi = gain * 2.0 * moments.quadrature * cfg.dt + dw;
    let dq_norm = if cfg.r < 1.0 { (-cfg.kappa * t).exp() * dxi } else { 0.0 };
    StepIncrement { dw, dxi, dq_norm }
}

/// Argument `s` of the homodyne propagator `exp(s a)`.
pub(crate) fn homodyne_kick(cfg: &SimConfig, dxi: f64) -> C64 {
    C64::from_polar(cfg.homodyne_gain() * dxi, -cfg.theta)
}

/// One no-click step: `exp(-kappa a^dag a dt) exp(s a) |psi>`, un-normalized.
pub fn sse_step(
    state: &FockVector,
    dw: f64,
    t: f64,
    cfg: &SimConfig,
) -> Result<(FockVector, StepIncrement)> {
    let moments = fock::expectations(state, cfg.theta)?;
    let inc = homodyne_increment(&moments, dw, t, cfg);
    let mut amps = state.amplitudes().to_vec();
    exp_lowering_in_place(&mut amps, homodyne_kick(cfg, inc.dxi), &mut Vec::new());
    damp_in_place(&mut amps, cfg.kappa * cfg.dt);
    Ok((FockVector::from_amplitudes(amps), inc))
}

/// `sqrt(2 kappa r) a |psi>`, un-normalized.
pub fn collapse(state: &FockVector, cfg: &SimConfig) -> Result<FockVector> {
    let out = fock::apply_annihilation(state).scaled(C64::new((2.0 * cfg.kappa * cfg.r).sqrt(), 0.0));
    let n2 = out.norm_sqr();
    if !(n2 >= 1e-300) {
        return Err(Error::ZeroNorm(n2));
    }
    Ok(out)
}

/// First-order low-pass `I_{k+1} = I_k - (dt/tau_d) I_k + dq_k / tau_d`, from `I_0 = 0`.
pub fn photocurrent_filter(dq: &[f64], tau_d: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dq.len() + 1);
    let mut current = 0.0;
    out.push(current);
    for &d in dq {
        current += (d - current * dt) / tau_d;
        out.push(current);
    }
    out
}

/// State representation driven by the shared stepping loop.
pub(crate) trait Unravelling {
    /// Moments of the current (normalized) state.
    fn moments(&self, theta: f64) -> Result<Expectations>;
    /// Applies `exp(s a)`.
    fn homodyne(&mut self, s: C64);
    /// Applies `a`.
    fn jump(&mut self);
    /// Applies `exp(-kappa a^dag a dt)`.
    fn damp(&mut self, kappa_dt: f64);
    fn renormalize(&mut self) -> Result<()>;
    fn snapshot(&self) -> CavityState;
}

pub(crate) struct FockWork {
    amps: Vec<C64>,
    active: usize,
    scratch: Vec<C64>,
}

impl FockWork {
    pub(crate) fn new(state: FockVector) -> Self {
        let amps = state.into_amplitudes();
        let active = amps.len();
        let mut work = Self { amps, active, scratch: Vec::new() };
        work.trim();
        work
    }

    fn trim(&mut self) {
        while self.active > 1 && self.amps[self.active - 1].norm_sqr() < TRIM_THRESHOLD {
            self.amps[self.active - 1] = C64::new(0.0, 0.0);
            self.active -= 1;
        }
    }
}

impl Unravelling for FockWork {
    fn moments(&self, theta: f64) -> Result<Expectations> {
        Ok(raw_moments(&self.amps[..self.active], theta, 1.0))
    }

    fn homodyne(&mut self, s: C64) {
        exp_lowering_in_place(&mut self.amps[..self.active], s, &mut self.scratch);
    }

    fn jump(&mut self) {
        lower_in_place(&mut self.amps[..self.active]);
    }

    fn damp(&mut self, kappa_dt: f64) {
        damp_in_place(&mut self.amps[..self.active], kappa_dt);
    }

    fn renormalize(&mut self) -> Result<()> {
        let n2: f64 = self.amps[..self.active].iter().map(|c| c.norm_sqr()).sum();
        if !(n2 >= 1e-300) {
            return Err(Error::ZeroNorm(n2));
        }
        let inv = 1.0 / n2.sqrt();
        for c in &mut self.amps[..self.active] {
            *c *= inv;
        }
        self.trim();
        Ok(())
    }

    fn snapshot(&self) -> CavityState {
        CavityState::Fock(FockVector::from_amplitudes(self.amps.clone()))
    }
}

struct Recorder {
    stride: usize,
    t_grid: Vec<f64>,
    q: Vec<f64>,
    i: Vec<f64>,
    n: Vec<f64>,
    quad: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, t: f64, q: f64, i: f64, m: &Expectations) {
        self.t_grid.push(t);
        self.q.push(q);
        self.i.push(i);
        self.n.push(m.photon_number);
        self.quad.push(m.quadrature);
    }
}

/// Runs the stepping loop shared by every state representation.
pub(crate) fn simulate<S: Unravelling>(cfg: &SimConfig, index: u64, mut state: S) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut rng: TrajectoryRng = rng::trajectory_rng(cfg.seed, index);
    let n_steps = cfg.n_steps();
    let charge_gain = (2.0 * cfg.kappa).sqrt();
    let mut snapshot_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).min(n_steps))
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();
    let mut next_snapshot = 0;

    let capacity = n_steps / cfg.record_stride + 2;
    let mut rec = Recorder {
        stride: cfg.record_stride,
        t_grid: Vec::with_capacity(capacity),
        q: Vec::with_capacity(capacity),
        i: Vec::with_capacity(capacity),
        n: Vec::with_capacity(capacity),
        quad: Vec::with_capacity(capacity),
    };
    let mut click_times = Vec::new();
    let mut click_charges = Vec::new();
    let mut snapshots = Vec::new();
    let mut charge = 0.0;
    let mut current = 0.0;
    let mut gaussian_draws = 0;
    let mut steps = 0;

    let mut moments = state.moments(cfg.theta)?;
    loop {
        let t = steps as f64 * cfg.dt;
        let stopped = cfg.stop_after_clicks.is_some_and(|k| click_times.len() >= k);
        let last = steps == n_steps || stopped;
        if steps % rec.stride == 0 || last {
            rec.push(t, charge, current, &moments);
        }
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] <= steps {
            snapshots.push(Snapshot { t, after_click: None, state: state.snapshot() });
            next_snapshot += 1;
        }
        if last {
            break;
        }

        let p = 2.0 * cfg.kappa * cfg.r * moments.photon_number * cfg.dt;
        let u = rng::uniform(&mut rng);
        let clicked = u < p;
        if clicked {
            state.jump();
            click_times.push(t);
            click_charges.push(charge);
            current -= current * cfg.dt / cfg.tau_d;
        } else {
            let dw = rng::standard_normal(&mut rng) * cfg.dt.sqrt();
            gaussian_draws += 1;
            let inc = homodyne_increment(&moments, dw, t, cfg);
            state.homodyne(homodyne_kick(cfg, inc.dxi));
            charge += charge_gain * inc.dq_norm;
            current += (inc.dq_norm - current * cfg.dt) / cfg.tau_d;
        }
        state.damp(cfg.kappa * cfg.dt);
        state.renormalize()?;
        steps += 1;
        moments = state.moments(cfg.theta)?;
        if clicked && click_times.len() <= cfg.snapshot_clicks {
            snapshots.push(Snapshot {
                t: steps as f64 * cfg.dt,
                after_click: Some(click_times.len()),
                state: state.snapshot(),
            });
        }
    }

    Ok(TrajectoryRecord {
        seed: cfg.seed,
        index,
        click_times,
        click_charges,
        t_grid: rec.t_grid,
        q_series: rec.q,
        i_series: rec.i,
        n_series: rec.n,
        quad_series: rec.quad,
        steps,
        gaussian_draws,
        final_charge: charge,
        final_state: state.snapshot(),
        snapshots,
    })
}

/// Full number-basis trajectory `index` of the ensemble described by `cfg`.
pub fn run_trajectory(cfg: &SimConfig, index: u64) -> Result<TrajectoryRecord> {
    let initial = cat_state(&cfg.cat, cfg.truncation)?;
    let record = simulate(cfg, index, FockWork::new(initial))?;
    if let CavityState::Fock(v) = &record.final_state {
        v.check_leakage()?;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, CatParams};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cfg(a: f64, phi0: f64, r: f64, theta: f64) -> SimConfig {
        let mut c = SimConfig::new(CatParams::new(a, phi0).unwrap());
        c.r = r;
        c.theta = theta;
        c
    }

    #[test]
    fn trigger_probability_examples() {
        let c0 = cfg(4.0, 0.0, 0.0, 0.0);
        let cat = cat_state(&c0.cat, 48).unwrap();
        assert_eq!(trigger_probability(&cat, &c0).unwrap(), 0.0);
        let c = cfg(4.0, 0.0, 0.5, 0.0);
        let p = trigger_probability(&cat, &c).unwrap();
        assert!((p - 2.0 * 0.5 * 16.0 * 16f64.tanh() * 0.002).abs() < 1e-6);
        assert_eq!(trigger_probability(&FockVector::vacuum(8), &c).unwrap(), 0.0);
        // Scale invariance on un-normalized input.
        let p2 = trigger_probability(&cat.scaled(C64::new(3.0, 1.0)), &c).unwrap();
        assert!((p - p2).abs() < 1e-15);
        let zero = FockVector::from_amplitudes(vec![C64::new(0.0, 0.0); 4]);
        assert!(matches!(trigger_probability(&zero, &c), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn sse_step_drift_and_limits() {
        let c = cfg(4.0, 0.0, 0.0, 0.0);
        let coh = coherent_state(C64::new(4.0, 0.0), 48).unwrap();
        let (_, inc) = sse_step(&coh, 0.0, 0.0, &c).unwrap();
        assert!((inc.dxi - 2f64.sqrt() * 8.0 * 0.002).abs() < 1e-6);
        let quad = fock::expectations(&coh, 0.0).unwrap().quadrature;
        assert!((inc.dxi - inc.dw - 2f64.sqrt() * 2.0 * quad * 0.002).abs() < 1e-12);

        let (v, inc) = sse_step(&FockVector::vacuum(6), 0.3, 0.0, &c).unwrap();
        assert_eq!(inc.dxi - inc.dw, 0.0);
        assert_eq!(v, FockVector::vacuum(6));

        let c1 = cfg(4.0, 0.0, 1.0, 0.0);
        let (out, inc) = sse_step(&coh, 0.5, 0.0, &c1).unwrap();
        assert_eq!(inc.dxi, inc.dw);
        assert_eq!(inc.dq_norm, 0.0);
        for (n, (a, b)) in out.amplitudes().iter().zip(coh.amplitudes()).enumerate() {
            assert!((a - b * (-(n as f64) * 0.002).exp()).norm() < 1e-15);
        }
    }

    #[test]
    fn collapse_flips_parity() {
        let c = cfg(4.0, 0.0, 0.5, 0.0);
        let even = cat_state(&CatParams::new(4.0, 0.0).unwrap(), 48).unwrap();
        let odd = cat_state(&CatParams::new(4.0, PI).unwrap(), 48).unwrap();
        let a = collapse(&even, &c).unwrap().normalized().unwrap();
        assert!((odd.inner(&a).norm() - 1.0).abs() < 1e-8);
        let b = collapse(&odd, &c).unwrap().normalized().unwrap();
        assert!((even.inner(&b).norm() - 1.0).abs() < 1e-8);
        let coh = coherent_state(C64::new(2.0, 1.0), 40).unwrap();
        let d = collapse(&coh, &c).unwrap().normalized().unwrap();
        assert!((coh.inner(&d).norm() - 1.0).abs() < 1e-8);
        assert!(matches!(collapse(&FockVector::vacuum(4), &c), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn filter_examples() {
        assert!(photocurrent_filter(&[0.0; 50], 0.04, 0.001).iter().all(|&i| i == 0.0));
        let dt = 0.001;
        let out = photocurrent_filter(&vec![2.5 * dt; 5000], 0.04, dt);
        assert!((out.last().unwrap() - 2.5).abs() < 1e-12);
        // Step response: 1 - 1/e of the asymptote after tau_d, within two steps.
        let tau = 0.04;
        let step = photocurrent_filter(&vec![dt; 400], tau, dt);
        let target = 1.0 - (-1.0f64).exp();
        let k = step.iter().position(|&i| i >= target).unwrap();
        assert!((k as f64 * dt - tau).abs() <= 2.0 * dt, "{}", k as f64 * dt);
    }

    #[test]
    fn record_shape_and_bookkeeping() {
        let mut c = cfg(3.0, 0.0, 0.5, FRAC_PI_2);
        c.t_max = 1.0;
        c.seed = 11;
        c.record_stride = 7;
        let rec = run_trajectory(&c, 2).unwrap();
        assert_eq!(rec.q_series[0], 0.0);
        assert_eq!(rec.t_grid.len(), rec.q_series.len());
        assert_eq!(rec.t_grid.len(), rec.quad_series.len());
        assert_eq!(*rec.t_grid.last().unwrap(), 1.0);
        assert_eq!(rec.gaussian_draws + rec.n_clicks(), rec.steps);
        assert!(rec.click_times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rec, run_trajectory(&c, 2).unwrap());
    }

    #[test]
    fn direct_detection_has_no_charge() {
        let mut c = cfg(3.0, 0.0, 1.0, 0.0);
        c.t_max = 2.0;
        let rec = run_trajectory(&c, 0).unwrap();
        assert!(rec.q_series.iter().all(|&q| q == 0.0));
        assert!(rec.i_series.iter().all(|&i| i == 0.0));
        assert!(rec.n_clicks() > 0);
    }

    #[test]
    fn stop_after_clicks_and_snapshots() {
        let mut c = cfg(3.0, 0.0, 0.5, 0.0);
        c.stop_after_clicks = Some(2);
        c.snapshot_clicks = 1;
        c.snapshot_times = vec![0.0, 0.1];
        let rec = run_trajectory(&c, 5).unwrap();
        assert_eq!(rec.n_clicks(), 2);
        let clicks: Vec<_> = rec.snapshots.iter().filter(|s| s.after_click.is_some()).collect();
        assert_eq!(clicks.len(), 1);
        let timed: Vec<_> = rec.snapshots.iter().filter(|s| s.after_click.is_none()).collect();
        assert!(timed.len() <= 2);
        assert_eq!(timed[0].t, 0.0);
    }
}
