//! Charge-diffusion engine: the charge random walk on the engine's time grid,
//! with conditioned moments read off the click-free closed form.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{CavityState, Snapshot, TrajectoryRecord};

use super::potential::{charge_sde_step, ChargeState, PotentialModel};
use super::two_component::null_record_state;

/// Trajectory `index` of the charge diffusion; homodyne-only detection.
pub fn charge_sde_trajectory(cfg: &SimConfig, index: u64) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if cfg.r != 0.0 {
        return Err(Error::config("engine", "charge diffusion requires r = 0"));
    }
    let model = PotentialModel::new(cfg.cat, cfg.theta, 0.0);
    let mut rng = rng::trajectory_rng(cfg.seed, index);
    let n_steps = cfg.n_steps();
    let gain = (2.0 * cfg.kappa).sqrt();
    let state_at = |q: f64, t: f64| null_record_state(&cfg.cat, q, cfg.theta, 0.0, t, cfg.kappa);
    let mut snapshot_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).min(n_steps))
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let mut rec = TrajectoryRecord {
        seed: cfg.seed,
        index,
        click_times: Vec::new(),
        click_charges: Vec::new(),
        t_grid: Vec::new(),
        q_series: Vec::new(),
        i_series: Vec::new(),
        n_series: Vec::new(),
        quad_series: Vec::new(),
        steps: n_steps,
        gaussian_draws: n_steps,
        final_charge: 0.0,
        final_state: CavityState::TwoComponent(state_at(0.0, 0.0)),
        snapshots: Vec::new(),
    };
    let mut charge = ChargeState::ORIGIN;
    let mut current = 0.0;
    for k in 0..=n_steps {
        let t = k as f64 * cfg.dt;
        if k % cfg.record_stride == 0 || k == n_steps {
            let m = state_at(charge.q, t).moments(cfg.theta)?;
            rec.t_grid.push(t);
            rec.q_series.push(charge.q);
            rec.i_series.push(current);
            rec.n_series.push(m.photon_number);
            rec.quad_series.push(m.quadrature);
        }
        if snapshot_steps.binary_search(&k).is_ok() {
            rec.snapshots.push(Snapshot {
                t,
                after_click: None,
                state: CavityState::TwoComponent(state_at(charge.q, t)),
            });
        }
        if k == n_steps {
            break;
        }
        let d_eta = (-2.0 * cfg.kappa * t).exp() * -(-2.0 * cfg.kappa * cfg.dt).exp_m1();
        let d_zeta = d_eta.sqrt() * rng::standard_normal(&mut rng);
        let next = charge_sde_step(&model, charge, d_eta.min(1.0 - charge.eta), d_zeta)?;
        let dq_norm = (next.q - charge.q) / gain;
        current += (dq_norm - current * cfg.dt) / cfg.tau_d;
        charge = next;
    }
    rec.final_charge = charge.q;
    rec.final_state = CavityState::TwoComponent(state_at(charge.q, n_steps as f64 * cfg.dt));
    Ok(rec)
}
