//! Desk-scale battery of the structural checks, printed as a table.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use roughfil_core::circle_algebra::{delta1, delta2, holder_norm_2, holder_norm_3, sewing, sewing_constant, HolderOptions};
use roughfil_core::corpus::{random_exact, random_grid_function, test_curves};
use roughfil_core::evolution::{evolve, gronwall_envelopes, FilamentState, RunConfig, Scheme};
use roughfil_core::fields::{energy_report, energy_rough, velocity_bound_check, KQuadrature};
use roughfil_core::kernel::{validate_hypothesis, KernelSpec};
use roughfil_core::rough_integral::{compose_smooth, rough_integral_total, young_integral, AffineMap, Pairing};
use roughfil_core::rough_path::{chen_defect, circle, lift_piecewise_linear, sample_brownian_bridge, ControlledCurve};
use roughfil_core::Result;

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Perturb one area entry of the first Chen-check curve.
    pub inject_area_perturbation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub pass: bool,
    pub measured: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<26} {:<6} {:>9}  {}\n", "check", "result", "seconds", "measured");
        for e in &self.entries {
            s += &format!(
                "{:<26} {:<6} {:>9.3}  {}\n",
                e.name,
                if e.pass { "PASS" } else { "FAIL" },
                e.seconds,
                e.measured
            );
        }
        s
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> SuiteEntry {
    let start = Instant::now();
    let (pass, measured) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteEntry { name: name.to_string(), pass, measured, seconds: start.elapsed().as_secs_f64() }
}

fn cochain() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let g = random_grid_function(64, 3, &mut rng);
        worst = worst.max(delta2(&delta1(&g)).max_abs());
    }
    Ok((worst <= 1e-14, format!("max |δ₂δ₁g| = {worst:.2e}")))
}

fn sewing_bound() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = HolderOptions::local();
    let (mut ratio, mut resid) = (0.0_f64, 0.0_f64);
    for mu in [1.1, 1.2, 1.5] {
        for _ in 0..5 {
            let h = random_exact(32, mu, &mut rng);
            let f = sewing(&h, mu)?;
            ratio = ratio.max(holder_norm_2(&f, mu, opts) / (sewing_constant(mu) * holder_norm_3(&h, mu, opts)));
            let back = delta2(&f);
            let diff = back.data.iter().zip(&h.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            resid = resid.max(diff / h.max_abs());
        }
    }
    Ok((ratio <= 1.0 && resid <= 1e-10, format!("bound ratio {ratio:.3}, δ₂Λh residual {resid:.1e}")))
}

fn chen(inject: bool) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for (k, c) in test_curves(128, 0..3)?.iter().enumerate() {
        let mut lift = c.lift()?.as_ref().clone();
        if inject && k == 0 {
            lift = lift.with_area_perturbation(70, 5, 1e-3 * lift.scale());
        }
        worst = worst.max(chen_defect(&lift) / lift.scale());
    }
    Ok((worst <= 1e-12, format!("max defect/scale {worst:.2e}")))
}

/// `∮ x dy` on the unit circle (exact value π) by the rough and Young sums.
pub fn circle_area_integrals(n: usize) -> Result<(f64, f64)> {
    let base = Arc::new(lift_piecewise_linear(&circle(n, 1.0)?, 0.9)?);
    let x = ControlledCurve::identity(base);
    let pick = AffineMap { a: [[0.0; 3], [1.0, 0.0, 0.0], [0.0; 3]], b: [0.0; 3] };
    let w = compose_smooth(&pick, &x)?;
    Ok((rough_integral_total(&w, &x, Pairing::Dot)?[0], young_integral(&w, &x, Pairing::Dot)?[0]))
}

fn young() -> Result<(bool, String)> {
    let (r, y) = circle_area_integrals(512)?;
    let rel = (r - y).abs() / y.abs();
    let (r64, _) = circle_area_integrals(64)?;
    let order = ((r64 - PI).abs() / (r - PI).abs()).log2() / 3.0;
    Ok((rel <= 1e-3 && order >= 1.5, format!("rel diff {rel:.1e}, order {order:.2}")))
}

fn hypothesis() -> Result<(bool, String)> {
    let mut pass = true;
    let mut worst = 0.0_f64;
    for mu in [0.25, 0.5, 1.0, 2.0] {
        let r = validate_hypothesis(&KernelSpec::rosenhead(1.0, mu)?)?;
        pass &= r.passed() && r.parseval_relative_error <= 1e-4;
        worst = worst.max(r.parseval_relative_error);
    }
    Ok((pass, format!("Parseval rel err {worst:.1e}")))
}

fn energy_agreement() -> Result<(bool, String)> {
    let kernel = KernelSpec::rosenhead(1.0, 1.0)?;
    let c = ControlledCurve::identity(Arc::new(lift_piecewise_linear(&circle(128, 1.0)?, 0.9)?));
    let r = energy_report(&c, &kernel, Some(KQuadrature::default()))?;
    Ok((r.agreement <= 1e-3, format!("H = {:.6}, agreement {:.1e}", r.h_rough, r.agreement)))
}

fn positivity() -> Result<(bool, String)> {
    let kernel = KernelSpec::rosenhead(1.0, 1.0)?;
    let mut min = f64::INFINITY;
    for seed in 0..10 {
        let base = Arc::new(lift_piecewise_linear(&sample_brownian_bridge(128, seed, [0.0; 3], 1.0)?, 0.4)?);
        min = min.min(energy_rough(&ControlledCurve::identity(base), &kernel)?);
    }
    Ok((min >= -1e-9, format!("min H = {min:.4e}")))
}

fn velocity_bound() -> Result<(bool, String)> {
    let kernel = KernelSpec::rosenhead(1.0, 1.0)?;
    let mut pass = true;
    let mut worst = 0.0_f64;
    for c in test_curves(64, [1])? {
        let cc = c.controlled()?;
        let h = energy_rough(&cc, &kernel)?;
        for n in 0..=2 {
            let r = velocity_bound_check(&cc, &kernel, n, h)?;
            pass &= r.pass;
            worst = worst.max(r.slack_ratio);
        }
    }
    Ok((pass, format!("worst sampled/bound {worst:.3}")))
}

fn conservation_smoke() -> Result<(bool, String)> {
    let kernel = KernelSpec::rosenhead(1.0, 1.0)?;
    let initial = FilamentState::initial(Arc::new(lift_piecewise_linear(&circle(32, 1.0)?, 0.9)?));
    let mut finals = Vec::new();
    let mut envelopes = true;
    let mut drift = 0.0;
    for dt in [0.02, 0.01, 0.005] {
        let cfg = RunConfig { t_final: 0.1, dt, scheme: Scheme::Rk4, diagnostics_every: 1, remainder_pairs: 0 };
        let out = evolve(&initial, &kernel, cfg)?;
        envelopes &= gronwall_envelopes(&out.diagnostics).all_pass();
        drift = out.diagnostics.max_relative_drift;
        finals.push(out.diagnostics.samples.last().expect("samples").energy);
    }
    let order = ((finals[0] - finals[1]).abs() / (finals[1] - finals[2]).abs()).log2();
    Ok((
        envelopes && order >= 3.5,
        format!("dt-order of energy {order:.2}, drift {drift:.1e}, envelopes {}", if envelopes { "ok" } else { "violated" }),
    ))
}

/// Runs every check in sequence.
pub fn validate_suite(opts: &SuiteOptions) -> SuiteReport {
    let inject = opts.inject_area_perturbation;
    let entries = vec![
        timed("cochain_exactness", cochain),
        timed("sewing_bound", sewing_bound),
        timed("chen_relation", || chen(inject)),
        timed("young_agreement", young),
        timed("kernel_hypothesis", hypothesis),
        timed("energy_agreement", energy_agreement),
        timed("energy_positivity", positivity),
        timed("velocity_bound", velocity_bound),
        timed("conservation_smoke", conservation_smoke),
    ];
    SuiteReport { entries }
}
