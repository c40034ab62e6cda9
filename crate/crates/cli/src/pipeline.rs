//! Energy, evolution and sweep pipelines with their output files:
//! `summary.json`, `run_log.jsonl` and `snapshots/`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use roughfil_core::evolution::{evolve, gronwall_envelopes, FilamentState, RunConfig};
use roughfil_core::fields::{energy_report, velocity_bound_check, KQuadrature};
use roughfil_core::kernel::{validate_hypothesis, KernelSpec};
use roughfil_core::rough_path::{
    chen_defect, circle, lift_piecewise_linear, read_snapshot, sample_brownian_bridge, trefoil, write_snapshot,
    ControlledCurve, GridCurve, RoughPath, SnapshotHeader,
};

use crate::config::{CheckName, CurveKind, Pipeline, Scenario};
use crate::CliError;

/// Relative tolerance of the Chen check, in units of `diam(X)²`.
pub const CHEN_TOLERANCE: f64 = 1e-12;
/// Energy floor, in units of `Γ²/μ`, for the positivity check.
pub const POSITIVITY_FLOOR: f64 = 1e-9;
/// Floor of the scheme-error scale in the remainder consistency check.
pub const REMAINDER_SCHEME_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: Value,
}

/// Machine-readable result of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub pipeline: Pipeline,
    pub scenario: Scenario,
    pub values: Value,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl Summary {
    fn new(pipeline: Pipeline, scenario: &Scenario, values: Value, checks: Vec<CheckResult>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        Self { pipeline, scenario: scenario.clone(), values, checks, all_pass }
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::numerical("summary", e))?;
        fs::write(dir.join("summary.json"), text + "\n")?;
        Ok(())
    }
}

/// Curve samples described by the scenario.
pub fn build_curve(s: &Scenario) -> Result<GridCurve, CliError> {
    let c = &s.curve;
    let err = |e| CliError::numerical("curve", e);
    match c.kind {
        CurveKind::Circle => circle(c.n, c.scale).map_err(err),
        CurveKind::Trefoil => trefoil(c.n, c.scale).map_err(err),
        CurveKind::BrownianBridge => {
            sample_brownian_bridge(c.n, c.seed.expect("validated"), [0.0; 3], c.scale).map_err(err)
        }
        CurveKind::File => {
            let path = c.path.as_ref().expect("validated");
            let f = File::open(path)
                .map_err(|e| crate::ConfigError(format!("cannot open curve file {}: {e}", path.display())))?;
            let (_, curve) =
                read_snapshot(BufReader::new(f)).map_err(|e| crate::ConfigError(format!("{}: {e}", path.display())))?;
            Ok(curve)
        }
    }
}

pub struct Setup {
    pub samples: GridCurve,
    pub base: Arc<RoughPath>,
    pub kernel: KernelSpec,
}

pub fn setup(s: &Scenario) -> Result<Setup, CliError> {
    let samples = build_curve(s)?;
    let base = Arc::new(lift_piecewise_linear(&samples, s.curve.nu).map_err(|e| CliError::numerical("lift", e))?);
    let kernel = KernelSpec::rosenhead(s.kernel.gamma, s.kernel.mu).map_err(|e| CliError::numerical("kernel", e))?;
    Ok(Setup { samples, base, kernel })
}

fn output_dir(s: &Scenario, fallback: &Path) -> PathBuf {
    s.output_dir.clone().unwrap_or_else(|| fallback.to_path_buf())
}

struct RunLog(BufWriter<File>);

impl RunLog {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self(BufWriter::new(File::create(dir.join("run_log.jsonl"))?)))
    }

    fn record(&mut self, v: &Value) -> Result<(), CliError> {
        writeln!(self.0, "{v}")?;
        Ok(())
    }
}

fn check(name: CheckName, pass: bool, measured: Value) -> CheckResult {
    CheckResult { name: name.as_str().to_string(), pass, measured }
}

/// Energies in every available form plus the requested energy-side checks.
pub fn run_energy(s: &Scenario, out: &Path) -> Result<Summary, CliError> {
    let dir = output_dir(s, out);
    let Setup { base, kernel, .. } = setup(s)?;
    let c = ControlledCurve::identity(base.clone());
    let quad = s.checks.fourier.then(KQuadrature::default);
    let report = energy_report(&c, &kernel, quad).map_err(|e| CliError::numerical("energy", e))?;
    let mut log = RunLog::create(&dir)?;
    log.record(&json!({
        "record": "energy",
        "t": 0.0,
        "h_rough": report.h_rough,
        "h_double": report.h_double,
        "h_fourier": report.h_fourier,
        "agreement": report.agreement,
    }))?;
    let mut checks = Vec::new();
    for name in s.checks.for_pipeline(Pipeline::Energy) {
        checks.push(match name {
            CheckName::Hypothesis => {
                let h = validate_hypothesis(&kernel).map_err(|e| CliError::numerical("hypothesis", e))?;
                check(name, h.passed(), serde_json::to_value(&h).expect("serializable"))
            }
            CheckName::Chen => {
                let defect = chen_defect(&base);
                let tol = CHEN_TOLERANCE * base.scale();
                check(name, defect <= tol, json!({"defect": defect, "tolerance": tol}))
            }
            CheckName::EnergyAgreement => {
                let tol = s.checks.agreement_tolerance;
                check(name, report.agreement <= tol, json!({"agreement": report.agreement, "tolerance": tol}))
            }
            CheckName::EnergyPositivity => {
                let floor = -POSITIVITY_FLOOR * s.kernel.gamma.powi(2) / s.kernel.mu;
                check(name, report.h_rough >= floor, json!({"h_rough": report.h_rough, "floor": floor}))
            }
            CheckName::VelocityBound => {
                let mut rows = Vec::new();
                let mut pass = true;
                for n in 0..=2 {
                    let r = velocity_bound_check(&c, &kernel, n, report.h_rough)
                        .map_err(|e| CliError::numerical("velocity_bound", e))?;
                    pass &= r.pass;
                    rows.push(serde_json::to_value(&r).expect("serializable"));
                }
                check(name, pass, Value::Array(rows))
            }
            _ => unreachable!("filtered by pipeline"),
        });
    }
    let summary = Summary::new(Pipeline::Energy, s, serde_json::to_value(&report).expect("serializable"), checks);
    summary.write(&dir)?;
    Ok(summary)
}

fn snapshot_header(s: &Scenario, t: f64, n: usize) -> SnapshotHeader {
    SnapshotHeader { n, nu: s.curve.nu, seed: s.curve.seed, scale: s.curve.scale, t: Some(t) }
}

/// Evolution to `run.t_final` with run log, snapshots and evolve checks.
pub fn run_evolve(s: &Scenario, out: &Path) -> Result<Summary, CliError> {
    let dir = output_dir(s, out);
    let Setup { base, kernel, .. } = setup(s)?;
    let initial = FilamentState::initial(base);
    let cfg = RunConfig {
        t_final: s.run.t_final,
        dt: s.run.dt,
        scheme: s.run.scheme,
        diagnostics_every: s.run.diagnostics_every,
        remainder_pairs: s.run.remainder_pairs,
    };
    let run = evolve(&initial, &kernel, cfg).map_err(|e| CliError::numerical("global_existence", e))?;
    let diag = &run.diagnostics;
    let envelopes = gronwall_envelopes(diag);
    let first = diag.samples[0];

    let mut log = RunLog::create(&dir)?;
    for smp in &diag.samples {
        let env = diag.constants.envelopes(&first, smp.t);
        let vals = [smp.sup_gamma, smp.sup_gamma_prime, smp.holder_gamma, smp.holder_gamma_prime, smp.remainder_holder];
        let flags: serde_json::Map<String, Value> = roughfil_core::evolution::ENVELOPE_NAMES
            .iter()
            .zip(vals.iter().zip(env))
            .map(|(n, (v, e))| (n.to_string(), Value::Bool(*v <= e * (1.0 + 1e-12))))
            .collect();
        log.record(&json!({
            "record": "diagnostic",
            "step": smp.step,
            "t": smp.t,
            "H": smp.energy,
            "relative_drift": smp.relative_drift,
            "norms": {
                "sup_gamma": smp.sup_gamma,
                "sup_gamma_prime": smp.sup_gamma_prime,
                "holder_gamma": smp.holder_gamma,
                "holder_gamma_prime": smp.holder_gamma_prime,
                "remainder_2nu": smp.remainder_holder,
            },
            "remainder_discrepancy": smp.remainder_discrepancy,
            "envelopes": flags,
        }))?;
    }

    if let Some(every) = s.run.snapshot_every {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        for (smp, state) in diag.samples.iter().zip(&run.states) {
            if smp.step % every == 0 {
                let f = File::create(snap_dir.join(format!("step_{:06}.txt", smp.step)))?;
                let header = snapshot_header(s, smp.t, state.gamma.n_points());
                write_snapshot(BufWriter::new(f), &header, &state.gamma).map_err(|e| CliError::numerical("snapshot", e))?;
            }
        }
    }

    let mut checks = Vec::new();
    for name in s.checks.for_pipeline(Pipeline::Evolve) {
        checks.push(match name {
            CheckName::Drift => {
                let tol = s.checks.drift_tolerance;
                check(name, diag.max_relative_drift <= tol, json!({"max_relative_drift": diag.max_relative_drift, "tolerance": tol}))
            }
            CheckName::Envelopes => check(name, envelopes.all_pass(), serde_json::to_value(&envelopes).expect("serializable")),
            CheckName::RemainderConsistency => {
                let worst = diag.samples.iter().filter_map(|x| x.remainder_discrepancy).fold(0.0, f64::max);
                let tol = 10.0 * (diag.max_relative_drift + REMAINDER_SCHEME_FLOOR);
                let enabled = s.run.remainder_pairs > 0;
                check(name, !enabled || worst <= tol, json!({"max_discrepancy": worst, "tolerance": tol, "pairs": s.run.remainder_pairs}))
            }
            _ => unreachable!("filtered by pipeline"),
        });
    }
    let last = diag.samples.last().expect("at least one sample");
    let values = json!({
        "steps": last.step,
        "t_final": last.t,
        "energy_initial": first.energy,
        "energy_final": last.energy,
        "max_relative_drift": diag.max_relative_drift,
        "constants": diag.constants,
        "final_norms": {
            "sup_gamma": last.sup_gamma,
            "sup_gamma_prime": last.sup_gamma_prime,
            "holder_gamma": last.holder_gamma,
            "holder_gamma_prime": last.holder_gamma_prime,
            "remainder_2nu": last.remainder_holder,
        },
    });
    let summary = Summary::new(Pipeline::Evolve, s, values, checks);
    summary.write(&dir)?;
    Ok(summary)
}

/// Independent runs over one parameter, each in `run_XXX/`.
pub fn run_sweep(s: &Scenario, out: &Path) -> Result<Summary, CliError> {
    let dir = output_dir(s, out);
    let sweep = s.sweep.clone().ok_or_else(|| crate::ConfigError("missing [sweep] section".into()))?;
    let runs: Vec<Result<Summary, CliError>> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut sub = s.with_parameter(sweep.parameter, v)?;
            sub.output_dir = Some(dir.join(format!("run_{k:03}")));
            sub.pipeline = Some(sweep.pipeline);
            match sweep.pipeline {
                Pipeline::Energy => run_energy(&sub, out),
                Pipeline::Evolve => run_evolve(&sub, out),
                _ => unreachable!("validated"),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (k, (r, v)) in runs.into_iter().zip(&sweep.values).enumerate() {
        let r = r?;
        for c in &r.checks {
            checks.push(CheckResult { name: format!("run_{k:03}/{}", c.name), pass: c.pass, measured: c.measured.clone() });
        }
        rows.push(json!({"index": k, "value": v, "all_pass": r.all_pass, "values": r.values}));
    }
    let summary = Summary::new(Pipeline::Sweep, s, json!({"parameter": sweep.parameter, "runs": rows}), checks);
    summary.write(&dir)?;
    Ok(summary)
}

pub fn run_scenario(s: &Scenario, out: &Path) -> Result<Summary, CliError> {
    match s.pipeline.unwrap_or(Pipeline::Energy) {
        Pipeline::Energy => run_energy(s, out),
        Pipeline::Evolve => run_evolve(s, out),
        Pipeline::Sweep => run_sweep(s, out),
        Pipeline::Validate => {
            let report = crate::suite::validate_suite(&crate::suite::SuiteOptions::default());
            let checks = report
                .entries
                .iter()
                .map(|e| CheckResult { name: e.name.clone(), pass: e.pass, measured: json!(e.measured) })
                .collect();
            let summary = Summary::new(Pipeline::Validate, s, Value::Null, checks);
            summary.write(&output_dir(s, out))?;
            Ok(summary)
        }
    }
}
