//! Charge diffusion in the time-dependent potential of the click-free record.
//!
//! With `eta = 1 - e^{-2 kappa t}` the cumulative charge obeys
//! `dQ = -dV/dQ d(eta) + d(zeta)`, `<d(zeta)^2> = d(eta)`, where
//!
//! `V = -ln[cosh(x) e^{a} + cos(y) e^{b}]`,
//! `x = 2uA cos(theta)`, `y = phi0 + 2uA sin(theta)`, `u = sqrt(1 - r) Q`,
//! `a = A^2 (1 - 2 eta cos^2 theta)`, `b = -A^2 (1 - 2 eta sin^2 theta)`.
//!
//! For `r = 0` the density of `Q` solves `dP/d(eta) = d/dQ (V' P) + P''/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::CatParams;
use crate::numerics::ln_cosh;
use crate::rng::{self, TrajectoryRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub cat: CatParams,
    pub theta: f64,
    pub r: f64,
}

/// Pieces of the potential shared by its value and slope.
struct Branches {
    /// `a + ln cosh(x)`
    lead: f64,
    /// `cos(y) e^{b - lead}`
    ratio: f64,
    tanh_x: f64,
    sin_y_weight: f64,
    /// `du/dQ = sqrt(1 - r)`
    du: f64,
}

impl PotentialModel {
    pub fn new(cat: CatParams, theta: f64, r: f64) -> Self {
        Self { cat, theta, r }
    }

    fn branches(&self, q: f64, eta: f64) -> Branches {
        let a = self.cat.amplitude;
        let a2 = a * a;
        let du = (1.0 - self.r).sqrt();
        let u = du * q;
        let (sin_t, cos_t) = self.theta.sin_cos();
        let x = 2.0 * u * a * cos_t;
        let y = self.cat.phi0 + 2.0 * u * a * sin_t;
        let lc = ln_cosh(x);
        let lead = a2 * (1.0 - 2.0 * eta * cos_t * cos_t) + lc;
        // b - lead = -2A^2 (1 - eta) - ln cosh(x)
        let weight = (-2.0 * a2 * (1.0 - eta) - lc).exp();
        Branches {
            lead,
            ratio: y.cos() * weight,
            tanh_x: x.tanh(),
            sin_y_weight: y.sin() * weight,
            du,
        }
    }

    /// `V(Q, eta)`; `+inf` where the logarithm's argument is not positive.
    pub fn value(&self, q: f64, eta: f64) -> f64 {
        let b = self.branches(q, eta);
        let tail = 1.0 + b.ratio;
        if tail <= 0.0 {
            return f64::INFINITY;
        }
        -b.lead - b.ratio.ln_1p()
    }

    /// Analytic `dV/dQ`; non-finite where the potential diverges.
    pub fn slope(&self, q: f64, eta: f64) -> f64 {
        let b = self.branches(q, eta);
        let a = self.cat.amplitude;
        let (sin_t, cos_t) = self.theta.sin_cos();
        let dx = 2.0 * a * cos_t * b.du;
        let dy = 2.0 * a * sin_t * b.du;
        let tail = 1.0 + b.ratio;
        if tail <= 0.0 {
            return f64::NAN;
        }
        -(b.tanh_x * dx - b.sin_y_weight * dy) / tail
    }

    /// Relative weight `e^{-2 A^2 (1 - eta)}` of the interference branch.
    pub fn interference_weight(&self, eta: f64) -> f64 {
        let a = self.cat.amplitude;
        (-2.0 * a * a * (1.0 - eta)).exp()
    }

    /// `ln P(Q, eta)` of the Fokker-Planck solution (`r = 0`).
    pub fn fpe_log_density(&self, q: f64, eta: f64) -> f64 {
        let a2 = self.cat.amplitude * self.cat.amplitude;
        let v = self.value(q, eta);
        if v == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        let norm = a2 + (self.cat.phi0.cos() * (-2.0 * a2).exp()).ln_1p();
        -q * q / (2.0 * eta) - 0.5 * (std::f64::consts::TAU * eta).ln() - v - norm
    }
}

pub fn potential_v(model: &PotentialModel, q: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(model.value(q, eta))
}

pub fn dv_dq(model: &PotentialModel, q: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let s = model.slope(q, eta);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Domain(format!("potential diverges at Q = {q}, eta = {eta}")))
    }
}

/// Density of the charge at `eta` for homodyne-only detection:
/// `e^{-Q^2/2eta} e^{-V} / (sqrt(2 pi eta) (e^{A^2} + cos(phi0) e^{-A^2}))`.
pub fn fpe_solution(model: &PotentialModel, q: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("eta = {eta} outside (0, 1]")));
    }
    if model.r != 0.0 {
        return Err(Error::Domain("the diffusion density assumes r = 0".into()));
    }
    Ok(model.fpe_log_density(q, eta).exp())
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("eta = {eta} outside [0, 1]")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeState {
    pub q: f64,
    pub eta: f64,
}

impl ChargeState {
    pub const ORIGIN: ChargeState = ChargeState { q: 0.0, eta: 0.0 };
}

/// Euler-Maruyama step `Q <- Q - V'(Q, eta) d_eta + d_zeta`.
pub fn charge_sde_step(
    model: &PotentialModel,
    state: ChargeState,
    d_eta: f64,
    d_zeta: f64,
) -> Result<ChargeState> {
    if !(d_eta >= 0.0) || state.eta + d_eta > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "step d_eta = {d_eta} from eta = {} leaves [0, 1]",
            state.eta
        )));
    }
    let slope = dv_dq(model, state.q, state.eta)?;
    Ok(ChargeState {
        q: state.q - slope * d_eta + d_zeta,
        eta: (state.eta + d_eta).min(1.0),
    })
}

/// Smallest `eta` increment taken near the end of the time change.
pub const MIN_ETA_STEP: f64 = 1e-6;
/// The diffusion is stopped here rather than at `eta = 1` exactly.
pub const ETA_END: f64 = 1.0 - 1e-9;

/// Drives [`charge_sde_step`] with steps mapped from a time grid.
#[derive(Clone, Copy, Debug)]
pub struct ChargeSde {
    pub model: PotentialModel,
    pub kappa: f64,
    pub dt: f64,
}

impl ChargeSde {
    /// `d_eta = 2 kappa e^{-2 kappa t} dt`, floored at [`MIN_ETA_STEP`].
    pub fn eta_step(&self, eta: f64) -> f64 {
        (2.0 * self.kappa * (1.0 - eta) * self.dt).max(MIN_ETA_STEP)
    }

    /// Integrates from `state` until `eta` reaches `target` (capped at [`ETA_END`]).
    pub fn advance(
        &self,
        mut state: ChargeState,
        target: f64,
        rng: &mut TrajectoryRng,
    ) -> Result<ChargeState> {
        let target = target.min(ETA_END);
        while state.eta < target {
            let d_eta = self.eta_step(state.eta).min(target - state.eta);
            let d_zeta = d_eta.sqrt() * rng::standard_normal(rng);
            state = charge_sde_step(&self.model, state, d_eta, d_zeta)?;
        }
        Ok(state)
    }

    /// Charge values at each of the increasing `targets`.
    pub fn path(&self, targets: &[f64], rng: &mut TrajectoryRng) -> Result<Vec<f64>> {
        let mut state = ChargeState::ORIGIN;
        targets
            .iter()
            .map(|&t| {
                state = self.advance(state, t, rng)?;
                Ok(state.q)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn model(a: f64, phi0: f64, theta: f64, r: f64) -> PotentialModel {
        PotentialModel::new(CatParams::new(a, phi0).unwrap(), theta, r)
    }

    #[test]
    fn quadrature_axis_at_the_end() {
        let m = model(4.0, 0.3, FRAC_PI_2, 0.0);
        for &q in &[-0.7f64, 0.0, 0.2, 1.3] {
            let want = -16.0 - (1.0 + (0.3 + 8.0 * q).cos()).ln();
            assert!((m.value(q, 1.0) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn value_at_origin() {
        for &phi0 in &[0.0, 1.0, PI] {
            let m = model(2.0, phi0, 0.0, 0.0);
            let want = -(4f64.exp() + phi0.cos() * (-4f64).exp()).ln();
            assert!((m.value(0.0, 0.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_infinite_potential() {
        let m = model(4.0, PI, FRAC_PI_2, 0.0);
        assert_eq!(m.value(0.0, 1.0), f64::INFINITY);
        assert!(dv_dq(&m, 0.0, 1.0).is_err());
        assert!(matches!(
            charge_sde_step(&m, ChargeState { q: 0.0, eta: 1.0 }, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn large_amplitude_is_finite() {
        let m = model(20.0, 1.0, 0.6, 0.0);
        for &q in &[-50.0, -3.0, 0.0, 7.5, 50.0] {
            for &eta in &[0.0, 0.4, 1.0] {
                assert!(m.value(q, eta).is_finite());
                assert!(m.slope(q, eta).is_finite());
                assert!(m.fpe_log_density(q, eta.max(0.1)).is_finite());
            }
        }
    }

    #[test]
    fn stationary_origin_for_even_cat() {
        let m = model(4.0, 0.0, 0.0, 0.0);
        let s = charge_sde_step(&m, ChargeState::ORIGIN, 0.01, 0.0).unwrap();
        assert_eq!(s.q, 0.0);
        assert!(charge_sde_step(&m, ChargeState { q: 0.0, eta: 0.999 }, 0.01, 0.0).is_err());
    }

    #[test]
    fn density_is_normalized() {
        for &(phi0, theta) in &[(0.0, FRAC_PI_2), (PI, FRAC_PI_2), (1.2, 0.0), (2.0, 0.7)] {
            let m = model(4.0, phi0, theta, 0.0);
            for &eta in &[0.25, 0.5, 1.0] {
                let f = |q: f64| m.fpe_log_density(q, eta).exp();
                let total: f64 = (0..160)
                    .map(|k| {
                        let lo = -20.0 + 0.25 * k as f64;
                        adaptive_simpson(&f, lo, lo + 0.25, 1e-14)
                    })
                    .sum();
                assert!((total - 1.0).abs() < 1e-8, "phi0 {phi0} theta {theta} eta {eta}: {total}");
            }
        }
    }
}
