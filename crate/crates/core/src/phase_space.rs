//! Wigner functions and quadrature marginals.
//!
//! Phase-space coordinates follow `alpha = x + i y`, so a coherent state
//! `|beta>` has `W = (2/pi) exp(-2 |alpha - beta|^2)`.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CatParams, FockVector, NORM_TOLERANCE};
use crate::numerics::trapezoid;
use crate::stats::Histogram;

/// Margin added to the cat amplitude when checking grid coverage.
pub const GRID_MARGIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, points: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
            nx: points,
            ny: points,
        }
    }

    /// 301 x 301 points over `[-(A + 4), A + 4]^2`.
    pub fn for_amplitude(amplitude: f64) -> Self {
        Self::square(amplitude + GRID_MARGIN, 301)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.dy()
    }

    fn require_extent(&self, extent: f64) -> Result<()> {
        let tol = 1e-12 * extent.max(1.0);
        let covered = self.nx >= 2
            && self.ny >= 2
            && self.x_min <= -extent + tol
            && self.x_max >= extent - tol
            && self.y_min <= -extent + tol
            && self.y_max >= extent - tol;
        if covered {
            Ok(())
        } else {
            Err(Error::GridTooSmall(format!(
                "grid [{}, {}] x [{}, {}] does not cover +-{extent}",
                self.x_min, self.x_max, self.y_min, self.y_max
            )))
        }
    }
}

/// Values on a rectangular grid, row-major with `y` as the row index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl WignerGrid {
    fn tabulate(spec: GridSpec, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let values = (0..spec.ny)
            .into_par_iter()
            .flat_map_iter(|iy| {
                let y = spec.y(iy);
                (0..spec.nx).map(move |ix| (ix, y))
            })
            .map(|(ix, y)| f(spec.x(ix), y))
            .collect();
        Self { spec, values }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.nx + ix]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        &self.values[iy * self.spec.nx..(iy + 1) * self.spec.nx]
    }

    /// Value at the grid node closest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> f64 {
        let s = &self.spec;
        let ix = (((x - s.x_min) / s.dx()).round().max(0.0) as usize).min(s.nx - 1);
        let iy = (((y - s.y_min) / s.dy()).round().max(0.0) as usize).min(s.ny - 1);
        self.value(ix, iy)
    }

    /// Two-dimensional trapezoid integral.
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = (0..self.spec.ny).map(|iy| trapezoid(self.row(iy), self.spec.dx())).collect();
        trapezoid(&rows, self.spec.dy())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cat Wigner function with component amplitude `a` and fringes scaled by `fringe`.
fn cat_wigner(params: &CatParams, a: f64, fringe: f64, x: f64, y: f64) -> f64 {
    let gauss = (-2.0 * (x - a).powi(2)).exp() + (-2.0 * (x + a).powi(2)).exp();
    let interference = 2.0 * fringe * (-2.0 * x * x).exp() * (params.phi0 + 4.0 * a * y).cos();
    (-2.0 * y * y).exp() * (gauss + interference) / (PI * params.norm_factor())
}

/// Wigner function of the initial cat.
pub fn wigner_cat_initial(params: &CatParams, grid: &GridSpec) -> Result<WignerGrid> {
    grid.require_extent(params.amplitude + GRID_MARGIN)?;
    let a = params.amplitude;
    Ok(WignerGrid::tabulate(*grid, |x, y| cat_wigner(params, a, 1.0, x, y)))
}

/// Unconditioned Wigner function at time `t`: amplitude `A e^{-kappa t}` and
/// fringes scaled by `exp[-2 A^2 (1 - e^{-2 kappa t})]`.
///
/// The prefactor `1 / (pi [1 + cos(phi0) e^{-2A^2}])` keeps unit weight at all
/// times, because the fringe factor times `e^{-2 A(t)^2}` equals `e^{-2A^2}`.
pub fn wigner_cat_me(params: &CatParams, t: f64, kappa: f64, grid: &GridSpec) -> Result<WignerGrid> {
    let a = params.amplitude * (-kappa * t).exp();
    grid.require_extent(a + GRID_MARGIN)?;
    let fringe = coherence_factor(params.amplitude, kappa, t);
    Ok(WignerGrid::tabulate(*grid, |x, y| cat_wigner(params, a, fringe, x, y)))
}

/// `exp[-2 A^2 (1 - e^{-2 kappa t})]`.
pub fn coherence_factor(amplitude: f64, kappa: f64, t: f64) -> f64 {
    (2.0 * amplitude * amplitude * (-2.0 * kappa * t).exp_m1()).exp()
}

/// Wigner function of a number-basis state by the Laguerre recurrence over
/// the matrix elements `|m><n|`.
pub fn wigner_from_state(state: &FockVector, grid: &GridSpec) -> Result<WignerGrid> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(n2));
    }
    state.check_leakage()?;
    let amps = state.amplitudes();
    let len = amps.iter().rposition(|c| c.norm_sqr() > 0.0).map_or(1, |k| k + 1);
    let amps = &amps[..len];
    let roots: Vec<f64> = (0..len).map(|k| (k as f64).sqrt()).collect();
    Ok(WignerGrid::tabulate(*grid, |x, y| {
        let mut work = vec![C64::new(0.0, 0.0); len];
        wigner_point(amps, &roots, C64::new(x, y), &mut work)
    }))
}

fn wigner_point(c: &[C64], roots: &[f64], alpha: C64, w: &mut [C64]) -> f64 {
    let len = c.len();
    let two_alpha = 2.0 * alpha;
    let two_conj = 2.0 * alpha.conj();
    w[0] = C64::new((-2.0 * alpha.norm_sqr()).exp() / PI, 0.0);
    let mut total = c[0].norm_sqr() * w[0].re;
    for n in 1..len {
        w[n] = two_alpha * w[n - 1] / roots[n];
        total += 2.0 * (c[0] * c[n].conj() * w[n]).re;
    }
    for m in 1..len {
        let mut prev = w[m];
        w[m] = (two_conj * prev - roots[m] * w[m - 1]) / roots[m];
        total += c[m].norm_sqr() * w[m].re;
        for n in m + 1..len {
            let next = (two_alpha * w[n - 1] - roots[m] * prev) / roots[n];
            prev = w[n];
            w[n] = next;
            total += 2.0 * (c[m] * c[n].conj() * w[n]).re;
        }
    }
    2.0 * total
}

/// Axis integrated out by [`marginal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrate {
    /// Integrate over `x`, leaving a density in `y`.
    AlongX,
    /// Integrate over `y`, leaving a density in `x`.
    AlongY,
}

/// Tabulated one-dimensional density on an increasing, uniform axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub axis: Vec<f64>,
    pub density: Vec<f64>,
}

impl Distribution {
    pub fn from_fn(axis: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let density = axis.iter().map(|&x| f(x)).collect();
        Self { axis, density }
    }

    /// Bin centres and per-record density of a histogram.
    pub fn from_histogram(h: &Histogram) -> Self {
        Self { axis: h.centers(), density: h.density() }
    }

    fn spacing(&self) -> f64 {
        if self.axis.len() < 2 {
            return 0.0;
        }
        (self.axis[self.axis.len() - 1] - self.axis[0]) / (self.axis.len() - 1) as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.spacing())
    }

    pub fn normalized(&self) -> Self {
        let total = self.integral();
        Self {
            axis: self.axis.clone(),
            density: self.density.iter().map(|d| d / total).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self.axis.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        trapezoid(&weighted, self.spacing()) / self.integral()
    }
}

/// Trapezoid marginal of a grid.
pub fn marginal(grid: &WignerGrid, integrate: Integrate) -> Distribution {
    let s = &grid.spec;
    match integrate {
        Integrate::AlongX => Distribution {
            axis: (0..s.ny).map(|iy| s.y(iy)).collect(),
            density: (0..s.ny).map(|iy| trapezoid(grid.row(iy), s.dx())).collect(),
        },
        Integrate::AlongY => Distribution {
            axis: (0..s.nx).map(|ix| s.x(ix)).collect(),
            density: (0..s.nx)
                .map(|ix| {
                    let column: Vec<f64> = (0..s.ny).map(|iy| grid.value(ix, iy)).collect();
                    trapezoid(&column, s.dy())
                })
                .collect(),
        },
    }
}

/// Density of the `y` quadrature of the initial cat,
/// `sqrt(2/pi) e^{-2y^2} [1 + cos(phi0 + 4Ay)] / (1 + cos(phi0) e^{-2A^2})`.
pub fn cat_marginal_y(params: &CatParams, y: f64) -> f64 {
    let a = params.amplitude;
    (FRAC_2_PI).sqrt() * (-2.0 * y * y).exp() * (1.0 + (params.phi0 + 4.0 * a * y).cos())
        / params.norm_factor()
}
