//! Trigger rates and waiting times.

use crate::fock::CatParams;
use crate::numerics::{adaptive_simpson, ln_cosh};

/// Approximate first-trigger waiting-time density for a large cat,
/// `w(tau) = 2 kappa exp[-r A^2 (1 - e^{-2 kappa tau})] / Z`, normalized on
/// `0 <= 2 kappa tau <= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaitingTime {
    pub r: f64,
    pub amplitude: f64,
    pub kappa: f64,
    /// `Z = int_0^1 exp[-r A^2 (1 - e^{-u})] du`
    pub normalizer: f64,
}

impl WaitingTime {
    pub fn new(r: f64, amplitude: f64, kappa: f64) -> Self {
        let load = r * amplitude * amplitude;
        let survival = move |u: f64| (-load * (-(-u).exp_m1())).exp();
        let normalizer = adaptive_simpson(&survival, 0.0, 1.0, 1e-14);
        Self { r, amplitude, kappa, normalizer }
    }

    /// End of the support, `1 / (2 kappa)`.
    pub fn horizon(&self) -> f64 {
        0.5 / self.kappa
    }

    fn survival(&self, u: f64) -> f64 {
        let load = self.r * self.amplitude * self.amplitude;
        (-load * (-(-u).exp_m1())).exp()
    }

    pub fn density(&self, tau: f64) -> f64 {
        if !(0.0..=self.horizon()).contains(&tau) {
            return 0.0;
        }
        2.0 * self.kappa * self.survival(2.0 * self.kappa * tau) / self.normalizer
    }

    pub fn cdf(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        if tau >= self.horizon() {
            return 1.0;
        }
        let u = 2.0 * self.kappa * tau;
        adaptive_simpson(&|v| self.survival(v), 0.0, u, 1e-14) / self.normalizer
    }

    pub fn mean(&self) -> f64 {
        let first = adaptive_simpson(&|u| u * self.survival(u), 0.0, 1.0, 1e-14);
        first / self.normalizer / (2.0 * self.kappa)
    }
}

/// `w1(tau)` evaluated directly.
pub fn waiting_time_w1(tau: f64, r: f64, amplitude: f64, kappa: f64) -> f64 {
    WaitingTime::new(r, amplitude, kappa).density(tau)
}

/// `cosh(phi) - sign cos(psi) e^{-2a2}`, split into non-negative pieces where
/// `phi` is small and rescaled by `cosh(phi)` where it is large.
///
/// Returns `(value / cosh(phi))` together with `ln cosh(phi)`.
fn cosh_minus_fringe(phi: f64, psi: f64, a2: f64, sign: f64) -> (f64, f64) {
    let lc = ln_cosh(phi);
    let c = sign * psi.cos();
    if phi.abs() > 20.0 {
        return (1.0 - c * (-2.0 * a2 - lc).exp(), lc);
    }
    let half = (0.5 * phi).sinh();
    let gap = if sign > 0.0 {
        2.0 * (0.5 * psi).sin().powi(2)
    } else {
        2.0 * (0.5 * psi).cos().powi(2)
    };
    let value = 2.0 * half * half + gap - c * (-2.0 * a2).exp_m1();
    (value / phi.cosh(), lc)
}

/// `2 kappa r A(t)^2 [cosh(phi) - s cos(psi) O] / [cosh(phi) + s cos(psi) O]`.
fn interference_rate(kappa: f64, r: f64, a2: f64, phi: f64, psi: f64, sign: f64) -> f64 {
    let (num, _) = cosh_minus_fringe(phi, psi, a2, sign);
    let (den, _) = cosh_minus_fringe(phi, psi, a2, -sign);
    2.0 * kappa * r * a2 * num / den
}

/// Density of the first trigger at `t` given the charge `q1` accumulated since `t = 0`.
pub fn p1_density(params: &CatParams, q1: f64, theta: f64, r: f64, t: f64, kappa: f64) -> f64 {
    let a = params.amplitude;
    let at = a * (-kappa * t).exp();
    let u = 2.0 * q1 * a * (1.0 - r).sqrt();
    let (s, c) = theta.sin_cos();
    interference_rate(kappa, r, at * at, u * c, params.phi0 + u * s, 1.0)
}

/// Density of a second trigger at `t > t1`, given the charge `q1` at the first
/// trigger and `q2` accumulated since then.
///
/// `q2` is measured against the mode envelope restarted at `t1`, so the
/// combined exponent is `2 [q2 A(t1) + q1 A] sqrt(1 - r)`.
#[allow(clippy::too_many_arguments)]
pub fn p2_density(
    params: &CatParams,
    q1: f64,
    q2: f64,
    theta: f64,
    r: f64,
    t: f64,
    t1: f64,
    kappa: f64,
) -> f64 {
    let a = params.amplitude;
    let at = a * (-kappa * t).exp();
    let at1 = a * (-kappa * t1).exp();
    let u = 2.0 * (q2 * at1 + q1 * a) * (1.0 - r).sqrt();
    let (s, c) = theta.sin_cos();
    interference_rate(kappa, r, at * at, u * c, params.phi0 + u * s, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn waiting_time_normalization_and_peak() {
        let w = WaitingTime::new(0.05, 20.0, 1.0);
        // Independent midpoint quadrature of the denominator.
        let n = 200_000;
        let z: f64 = (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) / n as f64;
                (-20.0 * (1.0 - (-u).exp())).exp()
            })
            .sum::<f64>()
            / n as f64;
        assert!((w.normalizer - z).abs() < 1e-9);
        assert!((w.density(0.0) - 2.0 / z).abs() < 1e-6);
        assert!((w.density(0.0) - 38.0).abs() < 0.2);
        assert!((w.cdf(w.horizon()) - 1.0).abs() < 1e-12);
        let total = adaptive_simpson(&|t| w.density(t), 0.0, 0.5, 1e-12);
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn waiting_time_mean() {
        let w = WaitingTime::new(0.05, 20.0, 1.0);
        let n = 200_000;
        let h = 0.5 / n as f64;
        let m: f64 = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                t * w.density(t) * h
            })
            .sum();
        assert!((w.mean() - m).abs() < 1e-9);
        // The trigger rate falls with the field as e^{-2 kappa t}, which lifts
        // the mean about 12% above 1 / (2 kappa r A^2).
        assert!(w.mean() > 0.025 && w.mean() < 0.029, "{}", w.mean());
    }

    #[test]
    fn p1_zero_cases() {
        let (kappa, r, a) = (1.0, 0.3, 1.2);
        let a2 = a * a;
        let even = CatParams::new(a, 0.0).unwrap();
        let odd = CatParams::new(a, PI).unwrap();
        let p_even = p1_density(&even, 0.0, 0.4, r, 0.0, kappa);
        let p_odd = p1_density(&odd, 0.0, 0.4, r, 0.0, kappa);
        assert!((p_even - 2.0 * kappa * r * a2 * a2.tanh()).abs() < 1e-12);
        assert!((p_odd - 2.0 * kappa * r * a2 / a2.tanh()).abs() < 1e-12);
        let big = CatParams::new(20.0, 0.7).unwrap();
        for &q in &[-3.0, 0.0, 0.4] {
            let p = p1_density(&big, q, 1.0, 0.05, 0.2, kappa);
            let at2 = 400.0 * (-0.4f64).exp();
            assert!((p / (2.0 * 0.05 * at2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_zero_cases() {
        let (kappa, r) = (1.0, 0.5);
        let p = CatParams::new(1.1, 0.0).unwrap();
        let t: f64 = 0.3;
        let at2 = 1.21 * (-2.0 * t).exp();
        let got = p2_density(&p, 0.0, 0.0, 0.2, r, t, 0.1, kappa);
        let want = 2.0 * kappa * r * at2 * (1.0 + (-2.0 * at2).exp()) / (1.0 - (-2.0 * at2).exp());
        assert!((got - want).abs() < 1e-10 * want);
        let big = CatParams::new(20.0, 0.0).unwrap();
        let got = p2_density(&big, 1.0, -2.0, 0.3, 0.05, 0.3, 0.1, kappa);
        assert!((got / (2.0 * 0.05 * 400.0 * (-0.6f64).exp()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_trigger_matches_flipped_first() {
        for &(phi0, theta, q) in &[(0.0, 0.3, 0.4), (1.0, 1.2, -0.8), (2.5, 0.0, 0.1)] {
            let p = CatParams::new(1.5, phi0).unwrap();
            let flipped = CatParams::new(1.5, (phi0 + PI) % std::f64::consts::TAU).unwrap();
            let a = p2_density(&p, 0.0, q, theta, 0.2, 0.4, 0.0, 1.0);
            let b = p1_density(&flipped, q, theta, 0.2, 0.4, 1.0);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}
