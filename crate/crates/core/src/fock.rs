//! Truncated number-basis representation of the cavity mode.
//!
//! A [`FockVector`] holds amplitudes `c_0..=c_N`. Coherent and cat states are
//! built from a log-domain recurrence so that no factorial is ever formed.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `|c_N|^2 / sum |c_n|^2` for a state accepted as valid.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;

/// Tolerance on `sum |c_n|^2 - 1` for operations that need a normalized input.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Amplitude and relative phase of the initial cat `(|A> + e^{i phi0}|-A>)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatParams {
    pub amplitude: f64,
    pub phi0: f64,
}

impl CatParams {
    pub fn new(amplitude: f64, phi0: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::config("A", format!("must be positive, got {amplitude}")));
        }
        if !(0.0..TAU).contains(&phi0) {
            return Err(Error::config("phi0", format!("must lie in [0, 2pi), got {phi0}")));
        }
        Ok(Self { amplitude, phi0 })
    }

    /// Default truncation `ceil(A^2 + 12A + 8)`.
    ///
    /// The homodyne drift feeds amplitude down from above the cutoff, so the
    /// basis must reach well past the initial Poisson tail for the conditioned
    /// dynamics to track the untruncated evolution.
    pub fn default_truncation(&self) -> usize {
        let a = self.amplitude;
        (a * a + 12.0 * a + 8.0).ceil() as usize
    }

    /// `1 + cos(phi0) e^{-2A^2}`, half the squared norm of `|A> + e^{i phi0}|-A>`.
    pub fn norm_factor(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        1.0 + self.phi0.cos() * (-2.0 * a2).exp()
    }

    /// Mean photon number of the initial cat.
    pub fn mean_photon_number(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        let w = self.phi0.cos() * (-2.0 * a2).exp();
        a2 * (1.0 - w) / (1.0 + w)
    }
}

/// Complex amplitudes of a cavity state in the basis `|0>, ..., |N>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    amplitudes: Vec<C64>,
}

impl FockVector {
    /// Wraps raw amplitudes; the truncation is `len - 1`.
    ///
    /// Panics on an empty vector.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        assert!(!amplitudes.is_empty(), "a Fock vector needs at least |0>");
        Self { amplitudes }
    }

    pub fn vacuum(truncation: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); truncation + 1];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn truncation(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Returns the state divided by its norm.
    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if !(n2 >= 1e-300) {
            return Err(Error::ZeroNorm(n2));
        }
        let inv = 1.0 / n2.sqrt();
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|c| c * inv).collect(),
        })
    }

    /// Relative population of the top level, `|c_N|^2 / sum |c_n|^2`.
    pub fn leakage(&self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return 0.0;
        }
        self.amplitudes[self.truncation()].norm_sqr() / n2
    }

    pub fn check_leakage(&self) -> Result<()> {
        let leakage = self.leakage();
        if leakage < LEAKAGE_THRESHOLD {
            Ok(())
        } else {
            Err(Error::TruncationLeakage {
                truncation: self.truncation(),
                leakage,
                threshold: LEAKAGE_THRESHOLD,
            })
        }
    }

    /// Inner product `<self|other>`; the shorter vector is zero-padded.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `sum_n (-1)^n |c_n|^2`.
    pub fn parity(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
            .sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Coherent state `|beta>` truncated at `truncation` photons, renormalized
/// inside the truncated space.
pub fn coherent_state(beta: C64, truncation: usize) -> Result<FockVector> {
    let state = FockVector {
        amplitudes: coherent_amplitudes(beta, truncation),
    };
    state.check_leakage()?;
    state.normalized()
}

/// Untruncated-normalization amplitudes `e^{-|b|^2/2} b^n / sqrt(n!)`.
pub(crate) fn coherent_amplitudes(beta: C64, truncation: usize) -> Vec<C64> {
    let mut amplitudes = vec![C64::new(0.0, 0.0); truncation + 1];
    if beta.norm_sqr() == 0.0 {
        amplitudes[0] = C64::new(1.0, 0.0);
        return amplitudes;
    }
    let ln_beta = beta.norm().ln();
    let arg = beta.arg();
    let mut ln_mag = -0.5 * beta.norm_sqr();
    for (n, c) in amplitudes.iter_mut().enumerate() {
        if n > 0 {
            ln_mag += ln_beta - 0.5 * (n as f64).ln();
        }
        *c = C64::from_polar(ln_mag.exp(), n as f64 * arg);
    }
    amplitudes
}

/// Normalized cat state `(|A> + e^{i phi0}|-A>) / sqrt(2[1 + cos(phi0) e^{-2A^2}])`.
pub fn cat_state(params: &CatParams, truncation: usize) -> Result<FockVector> {
    let base = coherent_amplitudes(C64::new(params.amplitude, 0.0), truncation);
    let relative = C64::from_polar(1.0, params.phi0);
    let amplitudes = base
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c * (1.0 + relative) } else { c * (1.0 - relative) })
        .collect();
    let state = FockVector { amplitudes };
    state.check_leakage()?;
    state.normalized()
}

/// Applies the annihilation operator; the top level becomes zero.
pub fn apply_annihilation(state: &FockVector) -> FockVector {
    let mut amplitudes = state.amplitudes.clone();
    lower_in_place(&mut amplitudes);
    FockVector { amplitudes }
}

pub(crate) fn lower_in_place(amps: &mut [C64]) {
    let len = amps.len();
    for n in 0..len.saturating_sub(1) {
        amps[n] = amps[n + 1] * ((n + 1) as f64).sqrt();
    }
    if let Some(top) = amps.last_mut() {
        *top = C64::new(0.0, 0.0);
    }
}

/// Conditioned moments of a normalized state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectations {
    /// `<a^dag a>`
    pub photon_number: f64,
    /// `<a>`
    pub field: C64,
    /// `<A_theta> = Re(<a> e^{-i theta})`
    pub quadrature: f64,
}

pub fn expectations(state: &FockVector, theta: f64) -> Result<Expectations> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(n2));
    }
    Ok(raw_moments(&state.amplitudes, theta, 1.0))
}

/// Moments of a possibly un-normalized amplitude slice, divided by `norm_sqr`.
pub(crate) fn raw_moments(amps: &[C64], theta: f64, norm_sqr: f64) -> Expectations {
    let mut n_mean = 0.0;
    let mut field = C64::new(0.0, 0.0);
    for n in 0..amps.len() {
        n_mean += n as f64 * amps[n].norm_sqr();
        if n + 1 < amps.len() {
            field += amps[n].conj() * amps[n + 1] * ((n + 1) as f64).sqrt();
        }
    }
    let photon_number = n_mean / norm_sqr;
    let field = field / norm_sqr;
    let quadrature = (field * C64::from_polar(1.0, -theta)).re;
    Expectations {
        photon_number,
        field,
        quadrature,
    }
}

/// In-place `exp(s a) |psi>` on the first `active` levels.
///
/// The lowering operator is nilpotent on a truncated space, so the series is
/// finite; it is cut once a term drops below 1e-18 of the running sum.
pub(crate) fn exp_lowering_in_place(amps: &mut [C64], s: C64, term: &mut Vec<C64>) {
    let len = amps.len();
    if s == C64::new(0.0, 0.0) || len < 2 {
        return;
    }
    term.clear();
    term.extend_from_slice(amps);
    let scale = amps.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt();
    for k in 1..len {
        let coeff = s / k as f64;
        let top = len - k;
        let mut largest = 0.0f64;
        for n in 0..top {
            let next = term[n + 1] * ((n + 1) as f64).sqrt() * coeff;
            term[n] = next;
            amps[n] += next;
            largest = largest.max(next.norm_sqr());
        }
        term[top] = C64::new(0.0, 0.0);
        if largest.sqrt() <= 1e-18 * scale {
            break;
        }
    }
}

/// In-place `exp(-kappa dt a^dag a)`.
pub(crate) fn damp_in_place(amps: &mut [C64], kappa_dt: f64) {
    let factor = (-kappa_dt).exp();
    let mut weight = 1.0;
    for c in amps.iter_mut() {
        *c *= weight;
        weight *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn vacuum_coherent_state() {
        let s = coherent_state(c(0.0), 10).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_photon_number() {
        let s = coherent_state(c(4.0), 48).unwrap();
        let e = expectations(&s, 0.0).unwrap();
        assert!((e.photon_number - 16.0).abs() < 1e-6, "{}", e.photon_number);
        assert!((e.quadrature - 4.0).abs() < 1e-6);
    }

    #[test]
    fn coherent_leakage_is_rejected() {
        // Poisson(16) mass at n = 12 is ~0.066.
        let err = coherent_state(c(4.0), 12).unwrap_err();
        assert!(matches!(err, Error::TruncationLeakage { truncation: 12, .. }));
        // A 30-photon basis does not pass the 1e-8 leakage bound at A = 4.
        assert!(coherent_state(c(4.0), 30).is_err());
    }

    #[test]
    fn cat_parity() {
        let even = cat_state(&CatParams::new(4.0, 0.0).unwrap(), 48).unwrap();
        let odd = cat_state(&CatParams::new(4.0, PI).unwrap(), 48).unwrap();
        for (n, (e, o)) in even.amplitudes().iter().zip(odd.amplitudes()).enumerate() {
            if n % 2 == 1 {
                assert!(e.norm() < 1e-15);
            } else {
                assert!(o.norm() < 1e-15);
            }
        }
        assert!((even.parity() - 1.0).abs() < 1e-12);
        assert!((odd.parity() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cat_photon_number() {
        let p = CatParams::new(4.0, 0.0).unwrap();
        let s = cat_state(&p, 48).unwrap();
        let e = expectations(&s, 0.3).unwrap();
        let oracle = 16.0 * 16f64.tanh();
        assert!((e.photon_number - oracle).abs() < 1e-6);
        assert!((p.mean_photon_number() - oracle).abs() < 1e-12);
        assert!(e.field.norm() < 1e-12);
    }

    #[test]
    fn cat_normalization_over_phases() {
        for k in 0..16 {
            let p = CatParams::new(2.5, TAU * k as f64 / 16.0).unwrap();
            let s = cat_state(&p, p.default_truncation()).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cat_params_validation() {
        assert!(CatParams::new(0.0, 0.0).is_err());
        assert!(CatParams::new(1.0, TAU).is_err());
        assert!(CatParams::new(1.0, -0.1).is_err());
        assert_eq!(CatParams::new(4.0, 0.0).unwrap().default_truncation(), 72);
    }

    #[test]
    fn annihilation_of_vacuum_and_even_cat() {
        let v = apply_annihilation(&FockVector::vacuum(10));
        assert_eq!(v.norm_sqr(), 0.0);

        let p = CatParams::new(4.0, 0.0).unwrap();
        let lowered = apply_annihilation(&cat_state(&p, 48).unwrap()).normalized().unwrap();
        let e = expectations(&lowered, 0.0).unwrap();
        assert!((e.photon_number - 16.0 / 16f64.tanh()).abs() < 1e-6);
        let odd = cat_state(&CatParams::new(4.0, PI).unwrap(), 48).unwrap();
        assert!((odd.inner(&lowered).norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn expectations_require_normalization() {
        let s = FockVector::vacuum(4).scaled(c(2.0));
        assert!(matches!(expectations(&s, 0.0), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn exp_lowering_on_coherent_state_is_a_phase() {
        let beta = C64::new(1.5, -0.7);
        let s = coherent_state(beta, 40).unwrap();
        let mut amps = s.amplitudes().to_vec();
        let shift = C64::new(0.2, 0.1);
        exp_lowering_in_place(&mut amps, shift, &mut Vec::new());
        let expected = (shift * beta).exp();
        for n in 0..30 {
            let want = s.amplitudes()[n] * expected;
            assert!((amps[n] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn damping_maps_coherent_to_coherent() {
        let beta = c(3.0);
        let mut amps = coherent_amplitudes(beta, 40);
        damp_in_place(&mut amps, 0.1);
        let shrunk = coherent_amplitudes(beta * (-0.1f64).exp(), 40);
        let ratio = amps[0] / shrunk[0];
        for n in 0..40 {
            assert!((amps[n] - shrunk[n] * ratio).norm() < 1e-12);
        }
    }
}
