use std::f64::consts::FRAC_PI_2;

use catdecay::ensemble::{
    intensity_field_h, modulation_onset, reconstruct_rho, run_ensemble, snapshot_states, CorrelationMode,
    Engine,
};
use catdecay::fock::CatParams;
use catdecay::stats::Histogram;
use catdecay::{SimConfig, TrajectoryRecord};
use proptest::prelude::*;

fn config(a: f64, phi0: f64, r: f64, theta: f64) -> SimConfig {
    let mut cfg = SimConfig::new(CatParams::new(a, phi0).unwrap());
    cfg.r = r;
    cfg.theta = theta;
    cfg
}

proptest! {
    #[test]
    fn histogram_mass_is_the_binned_fraction(
        samples in prop::collection::vec(-50.0f64..50.0, 0..400),
        skipped in 0usize..100,
        bins in 1usize..60,
        width in 0.01f64..5.0,
        lo in -60.0f64..0.0,
    ) {
        let total = samples.len() + skipped;
        prop_assume!(total > 0);
        let want = samples.len() as f64 / total as f64;
        let spanning = Histogram::spanning(&samples, bins, skipped);
        let fixed = Histogram::fixed(&samples, lo, width, bins, skipped);
        for h in [spanning, fixed] {
            prop_assert_eq!(h.records(), total);
            prop_assert!((h.mass() - want).abs() < 1e-12, "{} vs {}", h.mass(), want);
        }
        let counts: Vec<usize> = samples.iter().map(|x| x.abs() as usize).collect();
        let ints = Histogram::integers(&counts, skipped);
        prop_assert!((ints.mass() - want).abs() < 1e-12);
    }
}

fn snapshot_ensemble(n: usize, t: f64) -> (SimConfig, Vec<TrajectoryRecord>) {
    let mut cfg = config(2.0, 0.0, 0.5, 1.0);
    cfg.t_max = 1.0;
    cfg.n_traj = n;
    cfg.seed = 5;
    cfg.snapshot_times = vec![t];
    let records = run_ensemble(&cfg, Engine::Fock, |r| r).unwrap();
    (cfg, records)
}

#[test]
fn reconstruction_ignores_record_order() {
    let (cfg, records) = snapshot_ensemble(64, 0.4);
    let states = snapshot_states(&records, 0.4, cfg.truncation).unwrap();
    let rho = reconstruct_rho(&states).unwrap();
    let mut shuffled = states.clone();
    shuffled.reverse();
    shuffled.rotate_left(17);
    shuffled.swap(3, 40);
    assert_eq!(reconstruct_rho(&shuffled).unwrap(), rho);
}

#[test]
fn reconstructed_state_is_a_density_matrix() {
    let (cfg, records) = snapshot_ensemble(200, 0.5);
    let rho = reconstruct_rho(&snapshot_states(&records, 0.5, cfg.truncation).unwrap()).unwrap();
    assert!((rho.trace().re - 1.0).abs() < 1e-10 && rho.trace().im.abs() < 1e-10);
    assert!(rho.hermiticity_error() < 1e-10);
    assert!(rho.min_eigenvalue() > -1e-10, "{}", rho.min_eigenvalue());
    assert!(rho.purity() < 1.0);
}

#[test]
fn reversed_records_mirror_the_correlation() {
    let mut cfg = config(3.0, 0.6, 0.5, FRAC_PI_2);
    cfg.t_max = 2.0;
    cfg.n_traj = 40;
    cfg.seed = 11;
    let records = run_ensemble(&cfg, Engine::TwoComponent, |r| r).unwrap();
    let reversed: Vec<TrajectoryRecord> = records.iter().map(|r| r.time_reversed()).collect();
    for mode in [CorrelationMode::Quadrature, CorrelationMode::Photocurrent] {
        let h = intensity_field_h(&records, mode, 0.5, &cfg).unwrap();
        let hr = intensity_field_h(&reversed, mode, 0.5, &cfg).unwrap();
        let mirrored: Vec<f64> = hr.h.iter().rev().copied().collect();
        assert_eq!(mirrored, h.h);
        let tau: Vec<f64> = h.tau_grid.iter().rev().map(|t| -t).collect();
        assert_eq!(tau, h.tau_grid);
    }
}

/// In-phase detection of an even cat: positive and negative conditioned
/// quadratures are equally likely, so the click-triggered average vanishes.
/// The standard error is estimated at the record level, since clicks within
/// one record are correlated.
#[test]
fn in_phase_correlation_averages_to_zero() {
    let mut cfg = config(4.0, 0.0, 0.5, 0.0);
    cfg.n_traj = 5000;
    cfg.seed = 31;
    cfg.record_stride = 20;
    let records = run_ensemble(&cfg, Engine::TwoComponent, |mut r| {
        r.n_series = Vec::new();
        r.q_series = Vec::new();
        r.i_series = Vec::new();
        r
    })
    .unwrap();
    let window = 2.0;
    let h = intensity_field_h(&records, CorrelationMode::Quadrature, window, &cfg).unwrap();
    let width = h.h.len();
    let mut per_record = Vec::new();
    for r in &records {
        if let Ok(e) = intensity_field_h(std::slice::from_ref(r), CorrelationMode::Quadrature, window, &cfg) {
            per_record.push(e);
        }
    }
    let m = per_record.len() as f64;
    let mut failures = Vec::new();
    for k in 0..width {
        let total: f64 = per_record.iter().map(|e| e.counts[k] as f64).sum();
        if total == 0.0 {
            continue;
        }
        let sum = |e: &catdecay::ensemble::CorrelationEstimate| {
            if e.counts[k] == 0 { 0.0 } else { e.h[k] * e.counts[k] as f64 }
        };
        let mean = per_record.iter().map(sum).sum::<f64>() / total;
        assert!((mean - h.h[k]).abs() < 1e-9 * mean.abs().max(1.0));
        let resid: f64 = per_record
            .iter()
            .map(|e| (sum(e) - mean * e.counts[k] as f64).powi(2))
            .sum();
        let se = (resid * m / (m - 1.0)).sqrt() / total;
        if mean.abs() > 3.0 * se {
            failures.push((h.tau_grid[k], mean, se));
        }
    }
    assert!(failures.is_empty(), "{} of {width} delays off zero: {failures:?}", failures.len());
}

/// Quadrature detection after the wells form: single-record correlations
/// oscillate and overshoot their zero-delay value.
#[test]
fn quadrature_correlations_overshoot_after_onset() {
    let mut cfg = config(4.0, 0.0, 0.5, FRAC_PI_2);
    cfg.n_traj = 200;
    cfg.seed = 8;
    cfg.record_stride = 5;
    let records = run_ensemble(&cfg, Engine::TwoComponent, |r| r).unwrap();
    let onset = modulation_onset(4.0, cfg.kappa);
    let (mut late, mut overshoot) = (0, 0);
    for r in records.iter().filter(|r| r.click_times.iter().any(|&t| t > onset)) {
        late += 1;
        let h = intensity_field_h(std::slice::from_ref(r), CorrelationMode::Quadrature, 2.0, &cfg).unwrap();
        if let Ok(norm) = h.normalized() {
            let sign_changes = norm.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
            if sign_changes > 0 && norm.iter().any(|v| v.abs() > 1.0) {
                overshoot += 1;
            }
        }
    }
    assert!(late > 20, "{late} records click after the onset");
    assert!(2 * overshoot > late, "{overshoot} of {late}");
}
