//! Subcommands other than `run`.

use std::fs;
use std::path::{Path, PathBuf};

use catdecay::ensemble::{intensity_field_h, waiting_times, charges_at, ChargeEvent, CorrelationMode, Engine, TrajectorySummary};
use catdecay::fock::cat_state;
use catdecay::io::{correlation_text, from_json, parse_record_table, ClickSidecar, StateFile};
use catdecay::stats::ks_two_sample;
use catdecay::{CatParams, SimConfig, TrajectoryRecord};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::runner::{check_engine, record_stem, summaries, write_event_aggregates, write_state_wigners, Artifacts, RunManifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseCheck {
    pub label: String,
    pub truncation: usize,
    /// Initial-state weight in the top levels; `None` for engines without a number basis.
    pub leakage: Option<f64>,
    /// Largest per-step trigger probability, `2 kappa r nbar dt`.
    pub jump_probability: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub engine: Engine,
    pub cases: Vec<CaseCheck>,
    pub warnings: Vec<String>,
}

/// Checks a configuration without running or writing anything.
pub fn validate(cfg: &RunConfig, force: bool) -> Result<ValidationReport> {
    let cases = cfg.cases()?;
    let warnings = check_engine(cfg, &cases, force)?;
    let mut out = Vec::new();
    for case in &cases {
        let sim = &case.sim;
        let leakage = match cfg.engine {
            Engine::Fock => Some(cat_state(&sim.cat, sim.truncation)?.leakage()),
            _ => None,
        };
        out.push(CaseCheck {
            label: case.label.clone(),
            truncation: sim.truncation,
            leakage,
            jump_probability: sim.jump_probability_bound(),
            steps: sim.n_steps(),
        });
    }
    Ok(ValidationReport { engine: cfg.engine, cases: out, warnings })
}

/// Largest two-sample KS distance accepted between the engines.
pub const CROSSCHECK_TOLERANCE: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub config: SimConfig,
    pub fock_seed: u64,
    pub two_component_seed: u64,
    pub ks_click_count: f64,
    pub ks_first_click_charge: f64,
    pub ks_first_wait: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Configuration compared by `crosscheck`: `A = 4`, even cat, `r = 1/2`, `theta = 0`.
pub fn crosscheck_config(n_traj: usize, seed: u64) -> Result<SimConfig> {
    let mut sim = SimConfig::new(CatParams::new(4.0, 0.0)?);
    sim.r = 0.5;
    sim.theta = 0.0;
    sim.t_max = 6.0;
    sim.n_traj = n_traj;
    sim.seed = seed;
    sim.validate()?;
    Ok(sim)
}

/// Runs both engines with independent seeds and compares event statistics.
pub fn crosscheck(n_traj: usize, seed: u64) -> Result<CrosscheckReport> {
    let sim = crosscheck_config(n_traj, seed)?;
    let fock = summaries(Engine::Fock, &sim)?;
    let mut other = sim.clone();
    other.seed = seed.wrapping_add(1);
    let two = summaries(Engine::TwoComponent, &other)?;
    let counts = |s: &[TrajectorySummary]| s.iter().map(|r| r.click_times.len() as f64).collect::<Vec<_>>();
    let first_q = |s: &[TrajectorySummary]| charges_at(s, ChargeEvent::FIRST_CLICK).0;
    let first_w = |s: &[TrajectorySummary]| waiting_times(s, 1).0;
    let ks_click_count = ks_two_sample(&counts(&fock), &counts(&two));
    let ks_first_click_charge = ks_two_sample(&first_q(&fock), &first_q(&two));
    let ks_first_wait = ks_two_sample(&first_w(&fock), &first_w(&two));
    let passed = [ks_click_count, ks_first_click_charge, ks_first_wait]
        .iter()
        .all(|&d| d < CROSSCHECK_TOLERANCE);
    Ok(CrosscheckReport {
        config: sim,
        fock_seed: seed,
        two_component_seed: other.seed,
        ks_click_count,
        ks_first_click_charge,
        ks_first_wait,
        tolerance: CROSSCHECK_TOLERANCE,
        passed,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn invalid(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

fn stored_indices(dir: &Path) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    for entry in entries {
        let name = entry.map_err(|e| CliError::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(k) = name.strip_prefix("traj_").and_then(|s| s.strip_suffix(".states.json")) {
            if let Ok(k) = k.parse() {
                out.push(k);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Renders Wigner grids of every stored state of a finished run into
/// `<case>/wigner/`. Returns the files written.
pub fn wigner(run_dir: &Path, points: Option<usize>) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(run_dir)?;
    let points = points.unwrap_or(manifest.config.wigner_points);
    if points < 2 {
        return Err(CliError::config("wigner_points", "must be at least 2"));
    }
    let mut arts = Artifacts::new(run_dir);
    for case in &manifest.cases {
        let records = run_dir.join(&case.label).join("records");
        for k in stored_indices(&records)? {
            let path = records.join(format!("{}.states.json", record_stem(k)));
            let file: StateFile = from_json(&read(&path)?).map_err(|e| invalid(&path, e))?;
            write_state_wigners(&mut arts, &format!("{}/wigner", case.label), &record_stem(k), &file, &case.sim, points)?;
        }
    }
    Ok(arts.into_index().keys().map(|k| run_dir.join(k)).collect())
}

fn load_record(dir: &Path, index: u64) -> Result<TrajectoryRecord> {
    let stem = record_stem(index);
    let table_path = dir.join(format!("{stem}.tsv"));
    let table = parse_record_table(&read(&table_path)?).map_err(|e| invalid(&table_path, e))?;
    let clicks_path = dir.join(format!("{stem}.clicks.json"));
    let clicks: ClickSidecar = from_json(&read(&clicks_path)?).map_err(|e| invalid(&clicks_path, e))?;
    let states_path = dir.join(format!("{stem}.states.json"));
    let states: StateFile = from_json(&read(&states_path)?).map_err(|e| invalid(&states_path, e))?;
    Ok(TrajectoryRecord {
        seed: states.seed,
        index,
        click_times: clicks.click_times,
        click_charges: clicks.click_charges,
        final_charge: table.q.last().copied().unwrap_or(0.0),
        t_grid: table.t,
        q_series: table.q,
        i_series: table.i,
        n_series: table.n,
        quad_series: table.quad,
        steps: clicks.steps,
        gaussian_draws: clicks.gaussian_draws,
        final_state: states.final_state,
        snapshots: states.snapshots,
    })
}

/// Recomputes the event histograms and overlays of a finished run from its
/// stored summaries into `<case>/analysis/`, plus correlations over the
/// stored full records. Returns the files written.
pub fn analyze(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(run_dir)?;
    let mut arts = Artifacts::new(run_dir);
    for case in &manifest.cases {
        let label = &case.label;
        let path = run_dir.join(label).join("summaries.jsonl");
        let text = read(&path)?;
        let summaries: Vec<TrajectorySummary> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| from_json(l).map_err(|e| invalid(&path, e)))
            .collect::<Result<_>>()?;
        let prefix = format!("{label}/analysis");
        write_event_aggregates(&mut arts, &prefix, &manifest.config, label, &case.sim, &summaries)?;

        let dir = run_dir.join(label).join("records");
        let records: Vec<TrajectoryRecord> =
            stored_indices(&dir)?.into_iter().map(|k| load_record(&dir, k)).collect::<Result<_>>()?;
        if case.sim.r > 0.0 && !records.is_empty() {
            let mut modes = vec![(CorrelationMode::Photocurrent, "h_current_stored")];
            if case.sim.r < 1.0 {
                modes.insert(0, (CorrelationMode::Quadrature, "h_quad_stored"));
            }
            for (mode, name) in modes {
                match intensity_field_h(&records, mode, manifest.config.window, &case.sim) {
                    Ok(est) => {
                        let meta = json!({
                            "kind": "correlation",
                            "quantity": name,
                            "case": label,
                            "config": case.sim,
                            "records": records.len(),
                        });
                        arts.write(&format!("{prefix}/{name}.dat"), "correlation", &correlation_text(&est, meta))?
                    }
                    Err(catdecay::Error::NoClicks) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(arts.into_index().keys().map(|k| run_dir.join(k)).collect())
}
