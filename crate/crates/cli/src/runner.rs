//! Ensemble execution and artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use catdecay::closed_forms::{fpe_solution, PotentialModel, WaitingTime};
use catdecay::ensemble::{
    charge_histogram, charges_at, click_histogram, me_reference, waiting_time_histogram, waiting_times, Binning,
    ChargeEvent, CorrelationAccumulator, CorrelationMode, Engine, TrajectorySummary,
};
use catdecay::io::{correlation_text, distribution_text, table_text, to_json, wigner_text, write_record, StateFile};
use catdecay::phase_space::{wigner_from_state, Distribution, GridSpec, GRID_MARGIN};
use catdecay::stats::{Histogram, Summary};
use catdecay::trajectory::CavityState;
use catdecay::{SimConfig, TrajectoryRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Case, RunConfig};
use crate::error::{CliError, Result};

/// Trajectories per work unit. Partial sums are merged in block order, so
/// aggregates do not depend on the number of worker threads.
const BLOCK: usize = 64;

/// Largest amplitude the number-basis engine runs without `--force`.
pub const FOCK_AMPLITUDE_LIMIT: f64 = 8.0;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub label: String,
    pub phi0: f64,
    pub theta: f64,
    pub sim: SimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub engine: Engine,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub cases: Vec<CaseEntry>,
    /// Relative path -> artifact kind.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }
}

/// Artifact index under construction, keyed by path relative to the run directory.
pub(crate) struct Artifacts<'a> {
    root: &'a Path,
    index: BTreeMap<String, String>,
}

impl<'a> Artifacts<'a> {
    pub(crate) fn new(root: &'a Path) -> Self {
        Self { root, index: BTreeMap::new() }
    }

    pub(crate) fn write(&mut self, rel: &str, kind: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.index.insert(rel.to_string(), kind.to_string());
        Ok(())
    }

    fn note(&mut self, path: &Path, kind: &str) {
        let rel = path.strip_prefix(self.root).unwrap_or(path);
        self.index.insert(rel.to_string_lossy().into_owned(), kind.to_string());
    }

    pub(crate) fn into_index(self) -> BTreeMap<String, String> {
        self.index
    }
}

/// Refuses engine/configuration combinations that cannot work or would not
/// finish; returns warnings for the ones allowed by `force`.
pub fn check_engine(cfg: &RunConfig, cases: &[Case], force: bool) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if cfg.engine == Engine::ChargeSde && cfg.r != 0.0 {
        return Err(CliError::config("engine", "charge_sde describes homodyne-only detection and needs r = 0"));
    }
    if cfg.engine == Engine::Fock && cfg.amplitude > FOCK_AMPLITUDE_LIMIT {
        let n = cases.iter().map(|c| c.sim.truncation).max().unwrap_or(0);
        let steps = cases.first().map_or(0, |c| c.sim.n_steps());
        let estimate = format!(
            "fock engine at A = {} keeps {} levels ({} bytes per state, about {:.1e} amplitude updates per trajectory)",
            cfg.amplitude,
            n + 1,
            (n + 1) * 16,
            steps as f64 * (n + 1) as f64 * 4.0
        );
        if !force {
            return Err(CliError::EngineMismatch(format!(
                "{estimate}; use engine two_component for large cats or pass --force"
            )));
        }
        warnings.push(estimate);
    }
    Ok(warnings)
}

/// Sums of the conditioned series on the uniform record grid.
#[derive(Clone, Debug, Default)]
struct SeriesSums {
    n: Vec<f64>,
    n_sq: Vec<f64>,
    quad: Vec<f64>,
    quad_sq: Vec<f64>,
    count: Vec<usize>,
}

impl SeriesSums {
    fn grow(&mut self, len: usize) {
        if self.count.len() < len {
            self.n.resize(len, 0.0);
            self.n_sq.resize(len, 0.0);
            self.quad.resize(len, 0.0);
            self.quad_sq.resize(len, 0.0);
            self.count.resize(len, 0);
        }
    }

    fn add(&mut self, r: &TrajectoryRecord, spacing: f64) {
        let len = r
            .t_grid
            .iter()
            .enumerate()
            .take_while(|(k, &t)| (t - *k as f64 * spacing).abs() <= 1e-9 * spacing.max(t))
            .count();
        self.grow(len);
        for k in 0..len {
            let (n, q) = (r.n_series[k], r.quad_series[k]);
            self.n[k] += n;
            self.n_sq[k] += n * n;
            self.quad[k] += q;
            self.quad_sq[k] += q * q;
            self.count[k] += 1;
        }
    }

    fn merge(&mut self, other: &Self) {
        self.grow(other.count.len());
        for k in 0..other.count.len() {
            self.n[k] += other.n[k];
            self.n_sq[k] += other.n_sq[k];
            self.quad[k] += other.quad[k];
            self.quad_sq[k] += other.quad_sq[k];
            self.count[k] += other.count[k];
        }
    }

    /// Columns `t, n_mean, n_sem, quad_mean, quad_sem, records`.
    fn columns(&self, spacing: f64) -> Vec<Vec<f64>> {
        let len = self.count.len();
        let mut out = vec![Vec::with_capacity(len); 6];
        for k in 0..len {
            let c = self.count[k] as f64;
            let stats = |s: f64, sq: f64| {
                let mean = s / c;
                let var = if c > 1.0 { ((sq - c * mean * mean) / (c - 1.0)).max(0.0) } else { f64::NAN };
                (mean, (var / c).sqrt())
            };
            let (nm, ns) = stats(self.n[k], self.n_sq[k]);
            let (qm, qs) = stats(self.quad[k], self.quad_sq[k]);
            for (col, v) in out.iter_mut().zip([k as f64 * spacing, nm, ns, qm, qs, c]) {
                col.push(v);
            }
        }
        out
    }
}

/// Everything a run keeps from its trajectories.
pub(crate) struct Aggregate {
    pub(crate) summaries: Vec<TrajectorySummary>,
    pub(crate) full: Vec<TrajectoryRecord>,
    quad: CorrelationAccumulator,
    current: CorrelationAccumulator,
    series: SeriesSums,
    spacing: f64,
}

impl Aggregate {
    fn new(sim: &SimConfig, window: f64) -> Self {
        let spacing = sim.dt * sim.record_stride as f64;
        Self {
            summaries: Vec::new(),
            full: Vec::new(),
            quad: CorrelationAccumulator::new(CorrelationMode::Quadrature, window, spacing, sim),
            current: CorrelationAccumulator::new(CorrelationMode::Photocurrent, window, spacing, sim),
            series: SeriesSums::default(),
            spacing,
        }
    }

    fn add(&mut self, r: TrajectoryRecord, keep: bool) {
        self.summaries.push(TrajectorySummary::from(&r));
        self.quad.add(&r);
        self.current.add(&r);
        self.series.add(&r, self.spacing);
        if keep {
            self.full.push(r);
        }
    }

    fn merge(&mut self, other: Aggregate) {
        self.summaries.extend(other.summaries);
        self.full.extend(other.full);
        self.quad.merge(&other.quad);
        self.current.merge(&other.current);
        self.series.merge(&other.series);
    }
}

/// Runs trajectories `0..n_traj` of one case in parallel blocks.
pub(crate) fn collect(engine: Engine, sim: &SimConfig, window: f64, full_records: usize) -> Result<Aggregate> {
    let n = sim.n_traj;
    let blocks: Vec<(usize, usize)> = (0..n).step_by(BLOCK).map(|s| (s, (s + BLOCK).min(n))).collect();
    let parts: Vec<Aggregate> = blocks
        .into_par_iter()
        .map(|(start, end)| {
            let mut agg = Aggregate::new(sim, window);
            for k in start..end {
                agg.add(engine.run(sim, k as u64)?, k < full_records);
            }
            Ok(agg)
        })
        .collect::<Result<_>>()?;
    let mut total = Aggregate::new(sim, window);
    for part in parts {
        total.merge(part);
    }
    Ok(total)
}

/// Trajectory summaries only, without series or correlations.
pub fn summaries(engine: Engine, sim: &SimConfig) -> Result<Vec<TrajectorySummary>> {
    let out: Vec<TrajectorySummary> = (0..sim.n_traj as u64)
        .into_par_iter()
        .map(|k| engine.run(sim, k).map(|r| TrajectorySummary::from(&r)))
        .collect::<catdecay::Result<_>>()?;
    Ok(out)
}

fn meta(kind: &str, quantity: &str, label: &str, sim: &SimConfig) -> Value {
    json!({ "kind": kind, "quantity": quantity, "case": label, "config": sim })
}

fn histogram_text(h: &Histogram, samples: &[f64], mut meta: Value) -> String {
    let s = Summary::of(samples);
    let extra = json!({
        "records": h.records(),
        "skipped": h.skipped,
        "bin_width": h.width,
        "mean": s.mean,
        "variance": s.variance,
        "sem": s.sem,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    distribution_text(&Distribution::from_histogram(h), meta)
}

/// Click, charge and waiting-time histograms with their analytic overlays,
/// written under `prefix` (relative to the run directory).
pub(crate) fn write_event_aggregates(
    arts: &mut Artifacts,
    prefix: &str,
    cfg: &RunConfig,
    label: &str,
    sim: &SimConfig,
    summaries: &[TrajectorySummary],
) -> Result<()> {
    let clicks = click_histogram(summaries);
    let counts: Vec<f64> = summaries.iter().map(|s| s.click_times.len() as f64).collect();
    arts.write(
        &format!("{prefix}/clicks.dat"),
        "histogram",
        &histogram_text(&clicks.histogram, &counts, meta("histogram", "click_count", label, sim)),
    )?;

    let binning = match cfg.charge_bin {
        Some(width) => {
            let half = (2.0 * (sim.cat.amplitude + GRID_MARGIN) / width).ceil();
            Binning::Fixed { lo: -(half + 0.5) * width, width, bins: 2 * half as usize + 1 }
        }
        None => Binning::Spanning { bins: cfg.charge_bins },
    };
    let mut events = vec![(ChargeEvent::Final, "charge_final")];
    if sim.r > 0.0 {
        events.push((ChargeEvent::FIRST_CLICK, "charge_click1"));
        events.push((ChargeEvent::Click(2), "charge_click2"));
    }
    for (event, name) in events {
        let (samples, _) = charges_at(summaries, event);
        let h = charge_histogram(summaries, event, binning);
        arts.write(
            &format!("{prefix}/{name}.dat"),
            "histogram",
            &histogram_text(&h, &samples, meta("histogram", name, label, sim)),
        )?;
    }

    if sim.r == 0.0 {
        // End-of-record density of the homodyne charge.
        let eta = -(-2.0 * sim.kappa * sim.t_max).exp_m1();
        let model = PotentialModel::new(sim.cat, sim.theta, 0.0);
        let span = 2.0 * (sim.cat.amplitude + GRID_MARGIN);
        let axis: Vec<f64> = (0..=800).map(|k| -span + 2.0 * span * k as f64 / 800.0).collect();
        let dist = Distribution::from_fn(axis, |q| fpe_solution(&model, q, eta).unwrap_or(f64::NAN));
        let mut m = meta("overlay", "charge_final", label, sim);
        m["eta"] = json!(eta);
        arts.write(&format!("{prefix}/overlay_charge_final.dat"), "overlay", &distribution_text(&dist, m))?;
    } else {
        let a = sim.cat.amplitude;
        let tau_av = 1.0 / (2.0 * sim.kappa * sim.r * a * a);
        for (k, amplitude) in [(1usize, a), (2, a * (-sim.kappa * tau_av).exp())] {
            let (samples, _) = waiting_times(summaries, k);
            let h = waiting_time_histogram(summaries, k, cfg.wait_bin);
            let name = format!("wait{k}");
            arts.write(
                &format!("{prefix}/{name}.dat"),
                "histogram",
                &histogram_text(&h, &samples, meta("histogram", &name, label, sim)),
            )?;
            let w = WaitingTime::new(sim.r, amplitude, sim.kappa);
            let axis: Vec<f64> = (0..=500).map(|j| w.horizon() * j as f64 / 500.0).collect();
            let dist = Distribution::from_fn(axis, |t| w.density(t));
            let mut m = meta("overlay", &name, label, sim);
            m["amplitude"] = json!(amplitude);
            m["mean"] = json!(w.mean());
            arts.write(&format!("{prefix}/overlay_{name}.dat"), "overlay", &distribution_text(&dist, m))?;
        }
    }
    Ok(())
}

fn snapshot_label(t: f64, after_click: Option<usize>) -> String {
    match after_click {
        Some(c) => format!("click{c}"),
        None => format!("t{t:.4}"),
    }
}

/// Wigner grids of every stored state in `file`.
pub(crate) fn write_state_wigners(
    arts: &mut Artifacts,
    prefix: &str,
    stem: &str,
    file: &StateFile,
    sim: &SimConfig,
    points: usize,
) -> Result<()> {
    let grid = GridSpec::square(sim.cat.amplitude + GRID_MARGIN, points);
    let mut states: Vec<(String, f64, &CavityState)> = file
        .snapshots
        .iter()
        .map(|s| (snapshot_label(s.t, s.after_click), s.t, &s.state))
        .collect();
    states.push(("final".to_string(), sim.t_max, &file.final_state));
    for (name, t, state) in states {
        let w = wigner_from_state(&state.to_fock(sim.truncation)?, &grid)?;
        let m = json!({ "record": file.index, "state": name, "t": t, "seed": file.seed });
        arts.write(&format!("{prefix}/{stem}_{name}.dat"), "wigner", &wigner_text(&w, m))?;
    }
    Ok(())
}

pub(crate) fn record_stem(index: u64) -> String {
    format!("traj_{index:05}")
}

/// Executes every case of `cfg` and writes the artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &Path, force: bool) -> Result<RunManifest> {
    let cases = cfg.cases()?;
    check_engine(cfg, &cases, force)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut arts = Artifacts::new(out);
    let mut entries = Vec::new();
    for case in &cases {
        let sim = &case.sim;
        let label = &case.label;
        let agg = collect(cfg.engine, sim, cfg.window, cfg.full_records)?;

        let record_dir = out.join(label).join("records");
        fs::create_dir_all(&record_dir).map_err(|e| CliError::io(&record_dir, e))?;
        for r in &agg.full {
            let stem = record_stem(r.index);
            for path in write_record(&record_dir, &stem, r, sim).map_err(|e| CliError::io(&record_dir, e))? {
                let kind = if path.to_string_lossy().ends_with(".tsv") {
                    "trajectory"
                } else if path.to_string_lossy().ends_with(".clicks.json") {
                    "clicks"
                } else {
                    "states"
                };
                arts.note(&path, kind);
            }
        }

        let mut lines = String::new();
        for s in &agg.summaries {
            lines.push_str(&to_json(s).map_err(|e| CliError::io(out, e))?);
            lines.push('\n');
        }
        arts.write(&format!("{label}/summaries.jsonl"), "summaries", &lines)?;
        write_event_aggregates(&mut arts, label, cfg, label, sim, &agg.summaries)?;

        let series_meta = meta("series", "conditioned_means", label, sim);
        arts.write(
            &format!("{label}/mean_series.dat"),
            "series",
            &table_text(
                &["t", "n_mean", "n_sem", "quad_mean", "quad_sem", "records"],
                &agg.series.columns(agg.spacing),
                series_meta,
            ),
        )?;
        let times: Vec<f64> = (0..agg.series.count.len()).map(|k| k as f64 * agg.spacing).collect();
        let refs: Vec<_> = times.iter().map(|&t| me_reference(&sim.cat, sim.kappa, sim.theta, t)).collect();
        arts.write(
            &format!("{label}/reference.dat"),
            "reference",
            &table_text(
                &["t", "n", "quad", "coherence"],
                &[
                    times.clone(),
                    refs.iter().map(|m| m.photon_number).collect(),
                    refs.iter().map(|m| m.quad_mean).collect(),
                    refs.iter().map(|m| m.coherence_factor).collect(),
                ],
                meta("reference", "master_equation", label, sim),
            ),
        )?;

        if sim.r > 0.0 {
            let mut modes = vec![(&agg.current, "h_current")];
            if sim.r < 1.0 {
                modes.insert(0, (&agg.quad, "h_quad"));
            }
            for (acc, name) in modes {
                match acc.finish() {
                    Ok(est) => arts.write(
                        &format!("{label}/{name}.dat"),
                        "correlation",
                        &correlation_text(&est, meta("correlation", name, label, sim)),
                    )?,
                    Err(catdecay::Error::NoClicks) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }

        for r in agg.full.iter().take(cfg.wigner_records) {
            let file = StateFile {
                seed: r.seed,
                index: r.index,
                snapshots: r.snapshots.clone(),
                final_state: r.final_state.clone(),
            };
            write_state_wigners(&mut arts, &format!("{label}/wigner"), &record_stem(r.index), &file, sim, cfg.wigner_points)?;
        }

        entries.push(CaseEntry { label: label.clone(), phi0: sim.cat.phi0, theta: sim.theta, sim: sim.clone() });
    }

    let manifest = RunManifest {
        config: cfg.clone(),
        engine: cfg.engine,
        out_dir: out.to_path_buf(),
        master_seed: cfg.seed,
        cases: entries,
        artifacts: arts.into_index(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join(MANIFEST);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}
