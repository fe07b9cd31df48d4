//! Physical and numerical parameters of a simulation run.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::CatParams;

/// Upper bound on the per-step trigger probability `2 kappa r nbar dt`.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kappa: f64,
    pub cat: CatParams,
    /// Fraction of the output sent to the photon trigger.
    pub r: f64,
    /// Local-oscillator phase.
    pub theta: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Highest photon number kept by the Fock engine.
    pub truncation: usize,
    /// Photocurrent filter time constant.
    pub tau_d: f64,
    pub seed: u64,
    pub n_traj: usize,
    /// Keep every `record_stride`-th grid point in the recorded series.
    pub record_stride: usize,
    /// Times at which the conditioned state is stored in the record.
    pub snapshot_times: Vec<f64>,
    /// Number of leading clicks after which the conditioned state is stored.
    pub snapshot_clicks: usize,
    /// End a trajectory early once this many clicks have fired.
    pub stop_after_clicks: Option<usize>,
}

impl SimConfig {
    /// Defaults: `kappa = 1`, `dt = 0.002`, `t_max = 6`, `tau_d = 0.04`,
    /// homodyne-only detection at `theta = 0`.
    pub fn new(cat: CatParams) -> Self {
        Self {
            kappa: 1.0,
            truncation: cat.default_truncation(),
            cat,
            r: 0.0,
            theta: 0.0,
            dt: 0.002,
            t_max: 6.0,
            tau_d: 0.04,
            seed: 0,
            n_traj: 1,
            record_stride: 1,
            snapshot_times: Vec::new(),
            snapshot_clicks: 0,
            stop_after_clicks: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        CatParams::new(self.cat.amplitude, self.cat.phi0)?;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("kappa", self.kappa)?;
        positive("dt", self.dt)?;
        positive("t_max", self.t_max)?;
        positive("tau_d", self.tau_d)?;
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::config("r", format!("must lie in [0, 1], got {}", self.r)));
        }
        if !(0.0..PI).contains(&self.theta) {
            return Err(Error::config("theta", format!("must lie in [0, pi), got {}", self.theta)));
        }
        if self.dt > self.t_max {
            return Err(Error::config("dt", "must not exceed t_max"));
        }
        if self.truncation == 0 {
            return Err(Error::config("N", "must be at least 1"));
        }
        if self.n_traj == 0 {
            return Err(Error::config("n_traj", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(0.0..=self.t_max).contains(*t)) {
            return Err(Error::config("snapshot_times", format!("{t} lies outside [0, t_max]")));
        }
        let p = self.jump_probability_bound();
        if p >= MAX_JUMP_PROBABILITY {
            return Err(Error::config(
                "dt",
                format!("trigger probability per step 2*kappa*r*nbar*dt = {p:.4} exceeds {MAX_JUMP_PROBABILITY}"),
            ));
        }
        Ok(())
    }

    /// `2 kappa r nbar(0) dt` for the initial cat.
    pub fn jump_probability_bound(&self) -> f64 {
        2.0 * self.kappa * self.r * self.cat.mean_photon_number() * self.dt
    }

    /// Number of integration steps to reach `t_max`.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }

    pub fn homodyne_gain(&self) -> f64 {
        (2.0 * self.kappa * (1.0 - self.r)).sqrt()
    }
}
