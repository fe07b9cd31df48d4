//! Conditioned state as a superposition of two decaying coherent states.
//!
//! `|psi> = c+ |A e^{-kappa t}> + c- |-A e^{-kappa t}>` is exact for a cat
//! under this unraveling, and needs no photon-number cutoff. Coefficients are
//! kept as (log-magnitude, phase) so that `e^{A^2}`-sized factors never form.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, CatParams, Expectations, FockVector};
use crate::trajectory::{simulate, CavityState, TrajectoryRecord, Unravelling};

/// Squared norm below which a rescaled two-component state is rejected.
const COLLAPSE_THRESHOLD: f64 = 1e-280;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogCoefficient {
    pub ln_mag: f64,
    pub phase: f64,
}

impl LogCoefficient {
    pub fn new(ln_mag: f64, phase: f64) -> Self {
        Self { ln_mag, phase: phase.rem_euclid(TAU) }
    }

    /// `e^{ln_mag - shift} e^{i phase}`.
    pub fn scaled(&self, shift: f64) -> C64 {
        C64::from_polar((self.ln_mag - shift).exp(), self.phase)
    }

    fn multiply_exp(&mut self, z: C64) {
        self.ln_mag += z.re;
        self.phase = (self.phase + z.im).rem_euclid(TAU);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoComponentState {
    /// Coefficient on `|+A(t)>`.
    pub c_plus: LogCoefficient,
    /// Coefficient on `|-A(t)>`.
    pub c_minus: LogCoefficient,
    /// Initial amplitude `A`.
    pub a0: f64,
    pub kappa: f64,
    pub t: f64,
}

impl TwoComponentState {
    /// Un-normalized initial cat `|A> + e^{i phi0}|-A>`.
    pub fn cat(params: &CatParams, kappa: f64) -> Self {
        Self {
            c_plus: LogCoefficient::new(0.0, 0.0),
            c_minus: LogCoefficient::new(0.0, params.phi0),
            a0: params.amplitude,
            kappa,
            t: 0.0,
        }
    }

    /// Component amplitude `A e^{-kappa t}`.
    pub fn amplitude(&self) -> f64 {
        self.a0 * (-self.kappa * self.t).exp()
    }

    /// `<A(t)|-A(t)> = e^{-2 A(t)^2}`.
    pub fn overlap(&self) -> f64 {
        let a = self.amplitude();
        (-2.0 * a * a).exp()
    }

    /// Coefficients rescaled so the larger has unit magnitude.
    pub fn coefficients(&self) -> (C64, C64) {
        let shift = self.c_plus.ln_mag.max(self.c_minus.ln_mag);
        (self.c_plus.scaled(shift), self.c_minus.scaled(shift))
    }

    /// Squared norm of the rescaled coefficients in the non-orthogonal basis.
    pub fn scaled_norm_sqr(&self) -> f64 {
        let (cp, cm) = self.coefficients();
        let a = self.amplitude();
        (cp + cm).norm_sqr() + 2.0 * (cp.conj() * cm).re * (-2.0 * a * a).exp_m1()
    }

    pub fn moments(&self, theta: f64) -> Result<Expectations> {
        let (cp, cm) = self.coefficients();
        let a = self.amplitude();
        let gap = (-2.0 * a * a).exp_m1();
        let cross = (cp.conj() * cm).re;
        let n2 = (cp + cm).norm_sqr() + 2.0 * cross * gap;
        if !(n2 >= COLLAPSE_THRESHOLD) {
            return Err(Error::NormCollapse(n2));
        }
        let photon_number = a * a * ((cp - cm).norm_sqr() - 2.0 * cross * gap) / n2;
        let field = C64::new(
            cp.norm_sqr() - cm.norm_sqr(),
            2.0 * (1.0 + gap) * (cm.conj() * cp).im,
        ) * (a / n2);
        let quadrature = (field * C64::from_polar(1.0, -theta)).re;
        Ok(Expectations { photon_number, field, quadrature })
    }

    /// Normalized number-basis amplitudes.
    pub fn to_fock(&self, truncation: usize) -> Result<FockVector> {
        let a = self.amplitude();
        let (cp, cm) = self.coefficients();
        let plus = coherent_amplitudes(C64::new(a, 0.0), truncation);
        let amplitudes = plus
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { c * (cp + cm) } else { c * (cp - cm) })
            .collect();
        let state = FockVector::from_amplitudes(amplitudes);
        state.check_leakage()?;
        state.normalized()
    }

    fn rebalance(&mut self) {
        let shift = self.c_plus.ln_mag.max(self.c_minus.ln_mag);
        self.c_plus.ln_mag -= shift;
        self.c_minus.ln_mag -= shift;
    }
}

impl Unravelling for TwoComponentState {
    fn moments(&self, theta: f64) -> Result<Expectations> {
        TwoComponentState::moments(self, theta)
    }

    /// `exp(s a)|+-b> = e^{+-s b}|+-b>`.
    fn homodyne(&mut self, s: C64) {
        let z = s * self.amplitude();
        self.c_plus.multiply_exp(z);
        self.c_minus.multiply_exp(-z);
    }

    /// `a` multiplies the components by `+-A(t)`; the common magnitude is
    /// dropped, leaving a relative phase of pi.
    fn jump(&mut self) {
        self.c_minus.phase = (self.c_minus.phase + PI).rem_euclid(TAU);
    }

    /// The components shrink to `|+-A(t + dt)>`; their common prefactor is dropped.
    fn damp(&mut self, kappa_dt: f64) {
        self.t += kappa_dt / self.kappa;
    }

    fn renormalize(&mut self) -> Result<()> {
        self.rebalance();
        let n2 = self.scaled_norm_sqr();
        if n2 >= COLLAPSE_THRESHOLD {
            Ok(())
        } else {
            Err(Error::NormCollapse(n2))
        }
    }

    fn snapshot(&self) -> CavityState {
        CavityState::TwoComponent(self.clone())
    }
}

/// Un-normalized conditioned state after a click-free record with charge `q` at time `t`:
/// `c+- = exp[+-q A sqrt(1 - r) e^{-i theta}] (1, e^{i phi0})` times the common factor
/// `exp[-A^2 (1 - e^{-2 kappa t})]`.
pub fn null_record_state(
    params: &CatParams,
    q: f64,
    theta: f64,
    r: f64,
    t: f64,
    kappa: f64,
) -> TwoComponentState {
    let a = params.amplitude;
    let common = -a * a * (-(2.0 * kappa * t).exp_m1());
    let z = C64::from_polar(q * a * (1.0 - r).sqrt(), -theta);
    TwoComponentState {
        c_plus: LogCoefficient::new(common + z.re, z.im),
        c_minus: LogCoefficient::new(common - z.re, params.phi0 - z.im),
        a0: a,
        kappa,
        t,
    }
}

/// Trajectory `index` propagated in the two-component representation.
///
/// Consumes random numbers in the same order as the number-basis engine.
pub fn two_component_trajectory(cfg: &SimConfig, index: u64) -> Result<TrajectoryRecord> {
    simulate(cfg, index, TwoComponentState::cat(&cfg.cat, cfg.kappa))
}
