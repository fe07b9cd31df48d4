//! Analytic results for the click-free record and the two-component propagator.

mod diffusion;
mod potential;
mod rates;
mod two_component;

pub use diffusion::charge_sde_trajectory;
pub use potential::{
    charge_sde_step, dv_dq, fpe_solution, potential_v, ChargeSde, ChargeState, PotentialModel,
    ETA_END, MIN_ETA_STEP,
};
pub use rates::{p1_density, p2_density, waiting_time_w1, WaitingTime};
pub use two_component::{null_record_state, two_component_trajectory, LogCoefficient, TwoComponentState};
