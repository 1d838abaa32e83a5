//! Experiment pipelines and their JSON summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use lognls_core::fokker_planck::FpReport;
use lognls_core::pde::{
    read_field_binary, run_with, write_field_binary, RunOptions, SnapshotMeta,
};
use lognls_core::rescale::write_diagnostics_csv;
use lognls_core::{
    diagnose, ell, evolve_gaussian, fp_compare, from_v, gaussian_field, run_comoving, s_of_t,
    solve_tau, DiagnosticsRecord, GaussianInit, GaussianTrajectory, ModelParams, TauTrajectory,
    WaveField,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, Frame, InitSection, Kind, Spacing};
use crate::output::{resolve_output_dir, OutputSet};
use crate::plot::{self, PlotSpec, Table};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub kind: Kind,
    pub status: Status,
    pub checks: Vec<CheckResult>,
    pub metrics: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{module}::{operation} failed ({parameters}): {source}")]
    Core {
        module: &'static str,
        operation: &'static str,
        parameters: String,
        #[source]
        source: lognls_core::Error,
    },
    #[error("cannot load initial field {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl RunError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, RunError::Core { source, .. } if source.is_numerical())
    }

    /// `{module, operation, parameters, message}` for the error summary.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            RunError::Core {
                module,
                operation,
                parameters,
                source,
            } => serde_json::json!({
                "module": module,
                "operation": operation,
                "parameters": parameters,
                "message": source.to_string(),
            }),
            other => serde_json::json!({ "message": other.to_string() }),
        }
    }
}

fn core<T>(
    module: &'static str,
    operation: &'static str,
    parameters: impl FnOnce() -> String,
    r: lognls_core::Result<T>,
) -> Result<T, RunError> {
    r.map_err(|source| RunError::Core {
        module,
        operation,
        parameters: parameters(),
        source,
    })
}

struct Report {
    checks: Vec<CheckResult>,
    metrics: BTreeMap<String, f64>,
}

impl Report {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn check(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            value,
            limit,
            pass: value <= limit,
        });
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

fn csv_cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => String::new(),
    }
}

fn csv_text(header: &[&str], rows: &[Vec<Option<f64>>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| csv_cell(*v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn emit_svg(
    out: &mut OutputSet,
    report: &mut Report,
    name: &str,
    csv: &str,
    spec: &PlotSpec,
) -> Result<(), RunError> {
    let table = Table::from_reader(csv.as_bytes()).map_err(io_error)?;
    // a run too short to populate the plotted columns still succeeds
    if let Ok(p) = plot::render(&table, spec) {
        out.write(&format!("{name}.svg"), p.svg.as_bytes())?;
        if let Some(s) = p.slopes[0] {
            report.metric(&format!("{name}_plot_slope"), s);
        }
    }
    Ok(())
}

fn io_error(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Runs the configured pipeline, writing its outputs below the output
/// directory. `base_dir` resolves a relative `init.field` path.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    warnings: Vec<String>,
) -> Result<Summary, RunError> {
    let mut out = OutputSet::new(resolve_output_dir(&cfg.output.dir));
    let mut report = Report::new();
    match cfg.kind {
        Kind::GaussianOde => gaussian_ode(cfg, &mut out, &mut report)?,
        Kind::Asymptotics => asymptotics(cfg, &mut out, &mut report)?,
        Kind::Pde => pde(cfg, base_dir, &mut out, &mut report)?,
        Kind::Compare => compare(cfg, &mut out, &mut report)?,
        Kind::Fp => fp(cfg, base_dir, &mut out, &mut report)?,
    }
    let status = if report.checks.iter().all(|c| c.pass) {
        Status::Passed
    } else {
        Status::Failed
    };
    let mut summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        kind: cfg.kind,
        status,
        checks: report.checks,
        metrics: report.metrics,
        outputs: out.written().to_vec(),
        warnings,
    };
    if cfg.output.wants(Format::Json) {
        let path = out.dir().join("summary.json");
        summary.outputs.push(path);
        let text = serde_json::to_string_pretty(&summary).map_err(io_error)?;
        out.write("summary.json", text.as_bytes())?;
    }
    out.commit();
    Ok(summary)
}

fn gaussian_init(cfg: &ExperimentConfig) -> &GaussianInit {
    match &cfg.init {
        Some(InitSection::Gaussian(g)) => g,
        _ => unreachable!("validated: kind needs a Gaussian init"),
    }
}

fn evolve_closed_form(cfg: &ExperimentConfig) -> Result<GaussianTrajectory, RunError> {
    let init = gaussian_init(cfg);
    core(
        "gaussian_ode",
        "evolve_gaussian",
        || format!("lambda = {}, t_end = {}", cfg.model.lambda, cfg.times.t_end),
        evolve_gaussian(init, cfg.model.lambda, cfg.times.t_end, cfg.tolerances.rel_tol),
    )
}

fn gaussian_ode(
    cfg: &ExperimentConfig,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), RunError> {
    let traj = evolve_closed_form(cfg)?;
    let d = traj.dim();
    let exps = [0.25, 0.5, 0.75];
    let mut times = vec![0.0];
    times.extend(cfg.times.snapshot_times());

    let mut header: Vec<String> = vec!["t".into(), "ln_t".into()];
    for j in 1..=d {
        header.push(format!("r_{j}"));
        header.push(format!("r_dot_{j}"));
    }
    header.extend(["grad_norm_sq", "entropy_integral", "energy"].map(String::from));
    header.extend(exps.iter().map(|s| format!("Hs_{s}")));
    let mut rows = Vec::new();
    let mut fit = Vec::new();
    for &t in &times {
        let param = || format!("t = {t}");
        let mut row = vec![Some(t), (t > 0.0).then(|| t.ln())];
        for j in 0..d {
            let st = core("gaussian_ode", "axis_state", param, traj.axis_state(j, t))?;
            row.push(Some(st.r));
            row.push(Some(st.r_dot));
        }
        let grad = core("gaussian_ode", "gradient_norm_sq", param, traj.gradient_norm_sq(t))?;
        row.push(Some(grad));
        row.push(Some(core("gaussian_ode", "entropy_integral", param, traj.entropy_integral(t))?));
        row.push(Some(core("gaussian_ode", "energy", param, traj.energy(t))?));
        for s in exps {
            row.push(traj.hs_norm_sq(t, s).ok().map(f64::sqrt));
        }
        if t > std::f64::consts::E {
            fit.push((t.ln(), grad));
        }
        rows.push(row);
    }

    let defect = traj.max_first_integral_defect();
    report.metric("max_first_integral_defect", defect);
    report.metric("max_im_a_defect", traj.max_im_a_defect());
    report.check("first_integral_defect", defect, cfg.tolerances.first_integral);
    if let Some(slope) = plot::slope(&fit) {
        let target = 2.0 * cfg.model.lambda * d as f64 * traj.mass();
        report.metric("grad_norm_sq_slope_vs_ln_t", slope);
        report.metric("grad_norm_sq_slope_ratio", slope / target);
        report.check("grad_norm_sq_slope_ratio_deviation", (slope / target - 1.0).abs(), cfg.tolerances.slope_ratio);
    }

    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_text(&header_refs, &rows);
    if cfg.output.wants(Format::Csv) {
        out.write("gaussian_diagnostics.csv", csv.as_bytes())?;
        for j in 0..d {
            let mut buf = Vec::new();
            core("gaussian_ode", "write_axis_csv", || format!("axis = {j}"), traj.write_axis_csv(j, &mut buf))?;
            out.write(&format!("gaussian_axis{}.csv", j + 1), &buf)?;
        }
    }
    if cfg.output.wants(Format::Json) {
        let text = serde_json::to_string_pretty(&traj.metadata()).map_err(io_error)?;
        out.write("gaussian_meta.json", text.as_bytes())?;
    }
    if cfg.output.wants(Format::Svg) {
        let spec = PlotSpec {
            x: "ln_t".into(),
            y: vec!["grad_norm_sq".into()],
            log_x: false,
            log_y: false,
            title: "gradient norm squared against ln t".into(),
        };
        emit_svg(out, report, "grad_norm_sq", &csv, &spec)?;
    }
    Ok(())
}

fn tau_trajectory(cfg: &ExperimentConfig) -> Result<TauTrajectory, RunError> {
    core(
        "dispersion",
        "solve_tau",
        || format!("lambda = {}, t_end = {}", cfg.model.lambda, cfg.times.t_end),
        solve_tau(cfg.model.lambda, cfg.times.t_end, cfg.tolerances.rel_tol),
    )
}

fn asymptotics(
    cfg: &ExperimentConfig,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), RunError> {
    let traj = tau_trajectory(cfg)?;
    let lambda = cfg.model.lambda;
    let ratio_at = |t: f64| -> Result<(f64, f64, f64, f64), RunError> {
        let param = || format!("t = {t}");
        let (tau, tau_dot) = core("dispersion", "eval", param, traj.eval(t))?;
        let l = core("dispersion", "ell", param, ell(t))?;
        Ok((tau, tau_dot, tau / (2.0 * t * (lambda * t.ln()).sqrt()), l))
    };
    let mut rows = Vec::new();
    for t in cfg.times.snapshot_times() {
        let (tau, tau_dot, ratio, l) = ratio_at(t)?;
        let s = core("dispersion", "s_of_t", || format!("t = {t}"), s_of_t(&traj, t))?;
        rows.push(vec![Some(t), Some(tau), Some(tau_dot), Some(ratio), Some(l), Some(s)]);
    }
    let t_end = cfg.times.t_end;
    let (_, _, ratio, l) = ratio_at(t_end)?;
    let defect = traj.max_first_integral_defect();
    report.metric("final_ratio", ratio);
    report.metric("final_ell", l);
    report.metric("max_first_integral_defect", defect);
    report.check("final_ratio_deviation", (ratio - 1.0).abs(), 5.0 * l);
    report.check("first_integral_defect", defect, cfg.tolerances.first_integral);

    let csv = csv_text(&["t", "tau", "tau_dot", "ratio", "ell", "s"], &rows);
    if cfg.output.wants(Format::Csv) {
        out.write("asymptotics.csv", csv.as_bytes())?;
        let mut buf = Vec::new();
        core("dispersion", "write_csv", String::new, traj.write_csv(&mut buf))?;
        out.write("tau.csv", &buf)?;
    }
    if cfg.output.wants(Format::Svg) {
        let spec = PlotSpec {
            x: "t".into(),
            y: vec!["tau".into()],
            log_x: true,
            log_y: true,
            title: "tau against t".into(),
        };
        emit_svg(out, report, "tau", &csv, &spec)?;
    }
    Ok(())
}

fn load_field(path: &Path) -> Result<WaveField, RunError> {
    let bad = |message: String| RunError::Input {
        path: path.to_path_buf(),
        message,
    };
    let meta: SnapshotMeta = serde_json::from_reader(BufReader::new(
        File::open(path).map_err(|e| bad(e.to_string()))?,
    ))
    .map_err(|e| bad(e.to_string()))?;
    let bin = path.with_extension("bin");
    let file = File::open(&bin).map_err(|e| bad(format!("{}: {e}", bin.display())))?;
    read_field_binary(&meta, BufReader::new(file)).map_err(|e| bad(e.to_string()))
}

fn initial_field(cfg: &ExperimentConfig, base_dir: &Path) -> Result<WaveField, RunError> {
    let grid = cfg.grid.expect("validated: kind needs a grid");
    match cfg.init.as_ref().expect("validated: kind needs an init") {
        InitSection::Gaussian(g) => core(
            "gaussian_ode",
            "field",
            || format!("grid = {grid:?}"),
            g.field(grid),
        ),
        InitSection::Field { field } => {
            let path = base_dir.join(field);
            let u = load_field(&path)?;
            if u.grid != grid {
                return Err(RunError::Input {
                    path,
                    message: format!("field grid {:?} differs from [grid] {grid:?}", u.grid),
                });
            }
            Ok(u)
        }
    }
}

/// Result of a field evolution in either frame.
struct Evolution {
    /// `u` in the fixed frame, the profile `v` in the co-moving frame.
    snapshots: Vec<WaveField>,
    diagnostics: Vec<DiagnosticsRecord>,
    steps: usize,
    max_shell_fraction: f64,
    grid_changes: usize,
    traj: Option<TauTrajectory>,
    u0_norm: f64,
    initial: WaveField,
}

fn evolve(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Evolution, RunError> {
    let u0 = initial_field(cfg, base_dir)?;
    let params: ModelParams = cfg.model.params();
    let u0_norm = u0.norm();
    let times = cfg.times.snapshot_times();
    let t_end = cfg.times.t_end;
    let traj = if params.lambda > 0.0 {
        Some(tau_trajectory(cfg)?)
    } else {
        None
    };
    let describe = || format!("params = {params:?}, grid = {:?}, t_end = {t_end}", u0.grid);
    match cfg.times.frame {
        Frame::Fixed => {
            let dt = cfg.times.dt.expect("validated: kind needs dt");
            let opts = RunOptions {
                leak_threshold: Some(cfg.tolerances.shell_mass),
                ..RunOptions::default()
            };
            let run = core("pde_solver", "run", describe, run_with(&u0, &params, t_end, dt, &times, &opts))?;
            let diagnostics = match &traj {
                Some(tr) => std::iter::once(&u0)
                    .chain(&run.snapshots)
                    .map(|u| {
                        core("rescale_diagnostics", "diagnose", || format!("t = {}", u.t), diagnose(u, tr, &params, u0_norm, &[]))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => run.diagnostics,
            };
            Ok(Evolution {
                snapshots: run.snapshots,
                diagnostics,
                steps: run.steps,
                max_shell_fraction: run.max_shell_fraction,
                grid_changes: 0,
                traj,
                u0_norm,
                initial: u0,
            })
        }
        Frame::Comoving => {
            let tr = traj.expect("validated: comoving frame needs lambda > 0");
            let run = core(
                "pde_solver",
                "run_comoving",
                describe,
                run_comoving(
                    &u0,
                    &params,
                    &tr,
                    t_end,
                    &cfg.times.schedule(),
                    &times,
                    &cfg.tolerances.growth_policy(),
                ),
            )?;
            let mut diagnostics = run.diagnostics;
            if times.is_empty() {
                diagnostics.truncate(1);
            }
            Ok(Evolution {
                snapshots: run.snapshots,
                diagnostics,
                steps: run.steps,
                max_shell_fraction: run.max_shell_fraction,
                grid_changes: run.grid_changes.len() - 1,
                traj: Some(tr),
                u0_norm,
                initial: u0,
            })
        }
    }
}

fn conservation_checks(cfg: &ExperimentConfig, ev: &Evolution, report: &mut Report) {
    let r0 = &ev.diagnostics[0];
    let (mut mass, mut energy, mut momentum) = (0.0f64, 0.0f64, 0.0f64);
    for r in &ev.diagnostics {
        mass = mass.max((r.mass - r0.mass).abs() / r0.mass);
        energy = energy.max((r.energy_reg - r0.energy_reg).abs() / r0.energy_reg.abs().max(f64::MIN_POSITIVE));
        let dp = r
            .momentum
            .iter()
            .zip(&r0.momentum)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        momentum = momentum.max(dp / r0.mass);
    }
    let tol = &cfg.tolerances;
    report.metric("initial_mass", r0.mass);
    report.metric("initial_energy", r0.energy);
    report.metric("initial_energy_reg", r0.energy_reg);
    report.metric("steps", ev.steps as f64);
    report.metric("grid_changes", ev.grid_changes as f64);
    report.metric("records", ev.diagnostics.len() as f64);
    report.check("mass_drift", mass, tol.mass_drift);
    report.check("energy_reg_drift", energy, tol.energy_drift);
    report.check("momentum_drift_per_mass", momentum, tol.momentum_drift);
    report.check("shell_mass_fraction", ev.max_shell_fraction, tol.shell_mass);
}

fn write_snapshots(
    cfg: &ExperimentConfig,
    ev: &Evolution,
    out: &mut OutputSet,
) -> Result<(), RunError> {
    if !cfg.output.field_snapshots {
        return Ok(());
    }
    let params = Some(cfg.model.params());
    let prefix = match cfg.times.frame {
        Frame::Fixed => "field",
        Frame::Comoving => "profile",
    };
    for (k, f) in std::iter::once(&ev.initial).chain(&ev.snapshots).enumerate() {
        let mut buf = Vec::new();
        core("pde_solver", "write_field_binary", || format!("t = {}", f.t), write_field_binary(f, &mut buf))?;
        out.write(&format!("fields/{prefix}_{k:04}.bin"), &buf)?;
        let meta = serde_json::to_string_pretty(&SnapshotMeta::for_field(f, params)).map_err(io_error)?;
        out.write(&format!("fields/{prefix}_{k:04}.json"), meta.as_bytes())?;
    }
    Ok(())
}

fn pde(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), RunError> {
    let ev = evolve(cfg, base_dir)?;
    conservation_checks(cfg, &ev, report);
    if let Some(last) = ev.diagnostics.last() {
        for (name, v) in [
            ("final_pseudo_energy", last.pseudo_e),
            ("final_entropy", last.e_ent),
            ("final_m2", last.m2),
            ("final_w2", last.w2),
        ] {
            if let (Some(v), true) = (v, ev.diagnostics.len() > 1) {
                report.metric(name, v);
            }
        }
    }
    let mut buf = Vec::new();
    core("rescale_diagnostics", "write_diagnostics_csv", String::new, write_diagnostics_csv(&ev.diagnostics, &mut buf))?;
    if cfg.output.wants(Format::Csv) {
        out.write("diagnostics.csv", &buf)?;
    }
    if cfg.output.wants(Format::Svg) {
        let csv = String::from_utf8(buf).map_err(io_error)?;
        let (y, title) = if ev.traj.is_some() {
            ("pseudo_E", "pseudo-energy against t")
        } else {
            ("energy_reg", "regularized energy against t")
        };
        let spec = PlotSpec {
            x: "t".into(),
            y: vec![y.into()],
            log_x: cfg.times.spacing == Spacing::Logarithmic,
            log_y: false,
            title: title.into(),
        };
        emit_svg(out, report, y, &csv, &spec)?;
    }
    write_snapshots(cfg, &ev, out)
}

fn compare(
    cfg: &ExperimentConfig,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), RunError> {
    let closed = evolve_closed_form(cfg)?;
    let grid = cfg.grid.expect("validated");
    let u0 = initial_field(cfg, Path::new("."))?;
    let params = cfg.model.params();
    let dt = cfg.times.dt.expect("validated");
    let t_end = cfg.times.t_end;
    let mut times = cfg.times.snapshot_times();
    if times.last() != Some(&t_end) {
        times.push(t_end);
    }
    let opts = RunOptions {
        leak_threshold: Some(cfg.tolerances.shell_mass),
        ..RunOptions::default()
    };
    let run = core(
        "pde_solver",
        "run",
        || format!("params = {params:?}, grid = {grid:?}, dt = {dt}"),
        run_with(&u0, &params, t_end, dt, &times, &opts),
    )?;
    let m0 = u0.norm_sq();
    let mut rows = vec![vec![Some(0.0), Some(0.0), Some(0.0)]];
    let (mut max_err, mut max_drift) = (0.0f64, 0.0f64);
    for u in &run.snapshots {
        let exact = core("gaussian_ode", "gaussian_field", || format!("t = {}", u.t), gaussian_field(&closed, u.t, grid))?;
        let err = core("pde_solver", "distance", String::new, u.distance(&exact))? / exact.norm();
        let drift = (u.norm_sq() - m0).abs() / m0;
        max_err = max_err.max(err);
        max_drift = max_drift.max(drift);
        rows.push(vec![Some(u.t), Some(err), Some(drift)]);
    }
    let final_err = rows.last().and_then(|r| r[1]).unwrap_or(0.0);
    report.metric("l2_error", final_err);
    report.metric("max_l2_error", max_err);
    report.metric("mass_drift", max_drift);
    report.metric("steps", run.steps as f64);
    report.check("l2_error", final_err, cfg.tolerances.l2_error);
    report.check("mass_drift", max_drift, cfg.tolerances.mass_drift);

    let csv = csv_text(&["t", "l2_error", "mass_drift"], &rows);
    if cfg.output.wants(Format::Csv) {
        out.write("compare.csv", csv.as_bytes())?;
    }
    if cfg.output.wants(Format::Svg) {
        let spec = PlotSpec {
            x: "t".into(),
            y: vec!["l2_error".into()],
            log_x: false,
            log_y: true,
            title: "relative L2 error against the closed form".into(),
        };
        emit_svg(out, report, "l2_error", &csv, &spec)?;
    }
    Ok(())
}

/// Trends are checked only past this logarithmic time, after the transient
/// in which a Gaussian datum first moves away from the profile limit.
const TREND_S_MIN: f64 = 0.5;

/// Proxies below this are roundoff, e.g. odd moments of a centred datum.
const TREND_FLOOR: f64 = 1e-10;

/// Largest step-to-step increase relative to the previous value.
fn max_increase(values: &[f64]) -> f64 {
    values
        .windows(2)
        .filter(|w| w[1] > TREND_FLOOR)
        .map(|w| ((w[1] - w[0]) / w[0].abs().max(TREND_FLOOR)).max(0.0))
        .fold(0.0, f64::max)
}

/// Fails before the evolution when the snapshots cannot span `min_s_range`.
fn check_s_span(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let times = cfg.times.snapshot_times();
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Ok(());
    };
    let traj = tau_trajectory(cfg)?;
    let param = || format!("t_first = {t0}, t_end = {t1}");
    let span = core("dispersion", "s_of_t", param, s_of_t(&traj, t1))?
        - core("dispersion", "s_of_t", param, s_of_t(&traj, t0))?;
    if span < cfg.times.min_s_range {
        return Err(RunError::Core {
            module: "fokker_planck",
            operation: "fp_compare",
            parameters: format!("{} snapshots, min_s_range = {}", times.len(), cfg.times.min_s_range),
            source: lognls_core::Error::Precondition(format!(
                "snapshots span {span:.3} in s, need at least {}",
                cfg.times.min_s_range
            )),
        });
    }
    Ok(())
}

fn fp_rows(rep: &FpReport) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut header: Vec<String> = ["s", "t", "m1_gap", "m2_gap", "entropy", "w2"]
        .map(String::from)
        .to_vec();
    header.extend(rep.dictionary.iter().cloned());
    header.extend(rep.dictionary.iter().map(|n| format!("{n}_reference")));
    let rows = rep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                Some(r.s),
                Some(r.t),
                Some(r.moment_gaps.m1),
                Some(r.moment_gaps.m2),
                Some(r.entropy),
                r.w2,
            ];
            row.extend(r.proxies.iter().map(|v| Some(*v)));
            match &r.reference_proxies {
                Some(p) => row.extend(p.iter().map(|v| Some(*v))),
                None => row.extend(std::iter::repeat_n(None, rep.dictionary.len())),
            }
            row
        })
        .collect();
    (header, rows)
}

fn fp(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), RunError> {
    check_s_span(cfg)?;
    let ev = evolve(cfg, base_dir)?;
    let traj = ev.traj.as_ref().expect("validated: fp needs lambda > 0");
    let snapshots = match cfg.times.frame {
        Frame::Fixed => ev.snapshots.clone(),
        Frame::Comoving => ev
            .snapshots
            .iter()
            .map(|v| core("rescale_diagnostics", "from_v", || format!("t = {}", v.t), from_v(v, traj, ev.u0_norm)))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let rep = core(
        "fokker_planck",
        "fp_compare",
        || format!("{} snapshots, min_s_range = {}", snapshots.len(), cfg.times.min_s_range),
        fp_compare(&snapshots, traj, ev.u0_norm, cfg.times.min_s_range),
    )?;
    report.check("shell_mass_fraction", ev.max_shell_fraction, cfg.tolerances.shell_mass);
    for tr in &rep.trends {
        if let Some(s) = tr.log_slope {
            report.metric(&format!("{}_log_slope", tr.name), s);
        }
        report.metric(&format!("{}_last", tr.name), tr.last);
    }
    let late: Vec<_> = rep.rows.iter().filter(|r| r.s >= TREND_S_MIN).collect();
    report.metric("trend_rows", late.len() as f64);
    let mut series: Vec<(String, Vec<f64>)> = vec![
        ("entropy".into(), late.iter().map(|r| r.entropy).collect()),
        ("m2_gap".into(), late.iter().map(|r| r.moment_gaps.m2).collect()),
    ];
    if late.iter().all(|r| r.w2.is_some()) {
        series.push(("w2".into(), late.iter().filter_map(|r| r.w2).collect()));
    }
    for (k, name) in rep.dictionary.iter().enumerate() {
        series.push((name.clone(), late.iter().map(|r| r.proxies[k]).collect()));
    }
    for (name, values) in series {
        report.check(&format!("{name}_max_increase"), max_increase(&values), 0.0);
    }
    let (header, rows) = fp_rows(&rep);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_text(&header_refs, &rows);
    if cfg.output.wants(Format::Csv) {
        out.write("fp_rows.csv", csv.as_bytes())?;
    }
    if cfg.output.wants(Format::Json) {
        let text = serde_json::to_string_pretty(&rep).map_err(io_error)?;
        out.write("fp_report.json", text.as_bytes())?;
    }
    if cfg.output.wants(Format::Svg) {
        let spec = PlotSpec {
            x: "s".into(),
            y: vec!["entropy".into(), "m2_gap".into()],
            log_x: false,
            log_y: true,
            title: "relative entropy and second-moment gap against s".into(),
        };
        emit_svg(out, report, "fp_trends", &csv, &spec)?;
    }
    write_snapshots(cfg, &ev, out)
}
