//! Time integration of `dγ/dt = u^γ(γ)` with `γ` controlled by the fixed
//! lift of the initial curve, plus conservation and envelope diagnostics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{energy_rough, velocity, velocity_bound_constant};
use crate::kernel::{spectral_moment, Kernel};
use crate::linalg::{self, Mat3, Vec3};
use crate::quadrature::gauss_legendre_on;
use crate::rough_path::{ControlledCurve, ControlledNorm, GridCurve, RoughPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Rk4,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "rk4" => Ok(Self::Rk4),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}' (euler | rk4)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilamentState {
    pub t: f64,
    pub gamma: GridCurve,
    pub gamma_prime: Vec<Mat3>,
    pub base: Arc<RoughPath>,
}

impl FilamentState {
    /// `γ = X`, `γ′ = I`, `R = 0`.
    pub fn initial(base: Arc<RoughPath>) -> Self {
        let n = base.n_points();
        Self { t: 0.0, gamma: base.x().clone(), gamma_prime: vec![linalg::IDENTITY3; n], base }
    }

    pub fn controlled(&self) -> ControlledCurve {
        ControlledCurve::from_curve(&self.gamma, &self.gamma_prime, self.base.clone()).expect("state sizes agree")
    }

    fn is_finite(&self) -> bool {
        self.gamma.points().iter().flatten().all(|v| v.is_finite())
            && self.gamma_prime.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Time derivatives of `(γ, γ′)` at every node.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub d_gamma: Vec<Vec3>,
    pub d_gamma_prime: Vec<Mat3>,
    grad_u: Vec<Mat3>,
}

/// `dγ/dt = u(γ)`, `dγ′/dt = ∇u(γ) γ′`.
pub fn rhs<K: Kernel + ?Sized>(state: &FilamentState, kernel: &K) -> Result<Rhs> {
    let c = state.controlled();
    let evals = state
        .gamma
        .points()
        .par_iter()
        .map(|&x| velocity(&c, kernel, x, 1))
        .collect::<Result<Vec<_>>>()?;
    let grad_u: Vec<Mat3> = evals.iter().map(|e| e.grad_u.expect("gradient requested")).collect();
    let d_gamma_prime = grad_u.iter().zip(&state.gamma_prime).map(|(g, p)| linalg::mat_mul(g, p)).collect();
    Ok(Rhs { d_gamma: evals.iter().map(|e| e.u).collect(), d_gamma_prime, grad_u })
}

/// Remainder values `R(t, s)` on a few node pairs, evolved by
/// `dR/dt = ∇u(γ_s) R + ∫₀¹ [∇u(γ_s + rΔ) − ∇u(γ_s)] dr Δ`, `Δ = γ_t − γ_s`.
#[derive(Debug, Clone)]
struct RemainderProbe {
    pairs: Vec<(usize, usize)>,
    values: Vec<Vec3>,
}

const PROBE_QUADRATURE_POINTS: usize = 6;

impl RemainderProbe {
    fn new(state: &FilamentState, count: usize) -> Self {
        let n = state.gamma.n_points();
        let pairs: Vec<(usize, usize)> = (0..count)
            .map(|k| {
                let s = (k * n) / count.max(1);
                let gap = 1 + (k % 4) * (n / 16).max(1);
                ((s + gap) % n, s)
            })
            .collect();
        let values = definitional(state, &pairs);
        Self { pairs, values }
    }

    fn derivative<K: Kernel + ?Sized>(&self, state: &FilamentState, values: &[Vec3], rhs: &Rhs, kernel: &K) -> Result<Vec<Vec3>> {
        let c = state.controlled();
        let (r, w) = gauss_legendre_on(PROBE_QUADRATURE_POINTS, 0.0, 1.0);
        self.pairs
            .par_iter()
            .zip(values.par_iter())
            .map(|(&(t, s), rv)| -> Result<Vec3> {
                let gs = state.gamma.point(s);
                let delta = linalg::sub(state.gamma.point(t), gs);
                let base = rhs.grad_u[s];
                let mut avg = [[0.0; 3]; 3];
                for (ri, wi) in r.iter().zip(&w) {
                    let g = velocity(&c, kernel, linalg::add(gs, linalg::scale(delta, *ri)), 1)?.grad_u.expect("gradient");
                    avg = linalg::mat_add(&avg, &linalg::mat_scale(&g, *wi));
                }
                let corr = linalg::mat_add(&avg, &linalg::mat_scale(&base, -1.0));
                Ok(linalg::add(linalg::mat_vec(&base, *rv), linalg::mat_vec(&corr, delta)))
            })
            .collect()
    }
}

fn definitional(state: &FilamentState, pairs: &[(usize, usize)]) -> Vec<Vec3> {
    let x = state.base.x();
    pairs
        .iter()
        .map(|&(t, s)| {
            let dx = linalg::sub(x.point(t), x.point(s));
            let lin = linalg::mat_vec(&state.gamma_prime[s], dx);
            linalg::sub(linalg::sub(state.gamma.point(t), state.gamma.point(s)), lin)
        })
        .collect()
}

fn advance(state: &FilamentState, d: &Rhs, h: f64) -> FilamentState {
    let pts = state.gamma.points().iter().zip(&d.d_gamma).map(|(p, v)| linalg::add(*p, linalg::scale(*v, h))).collect();
    let gp = state
        .gamma_prime
        .iter()
        .zip(&d.d_gamma_prime)
        .map(|(p, v)| linalg::mat_add(p, &linalg::mat_scale(v, h)))
        .collect();
    FilamentState {
        t: state.t + h,
        gamma: GridCurve::new(pts).expect("size unchanged"),
        gamma_prime: gp,
        base: state.base.clone(),
    }
}

fn axpy(a: &[Vec3], b: &[Vec3], h: f64) -> Vec<Vec3> {
    a.iter().zip(b).map(|(x, y)| linalg::add(*x, linalg::scale(*y, h))).collect()
}

fn combine(k: [&Rhs; 4]) -> Rhs {
    let n = k[0].d_gamma.len();
    let w = [1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0];
    let mut out = Rhs { d_gamma: vec![[0.0; 3]; n], d_gamma_prime: vec![[[0.0; 3]; 3]; n], grad_u: Vec::new() };
    for (ki, wi) in k.iter().zip(w) {
        for i in 0..n {
            out.d_gamma[i] = linalg::add(out.d_gamma[i], linalg::scale(ki.d_gamma[i], wi));
            out.d_gamma_prime[i] = linalg::mat_add(&out.d_gamma_prime[i], &linalg::mat_scale(&ki.d_gamma_prime[i], wi));
        }
    }
    out
}

fn combine_vec(k: [&[Vec3]; 4]) -> Vec<Vec3> {
    let w = [1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0];
    (0..k[0].len())
        .map(|i| k.iter().zip(w).fold([0.0; 3], |acc, (ki, wi)| linalg::add(acc, linalg::scale(ki[i], wi))))
        .collect()
}

fn check_finite(state: &FilamentState) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::StepRejected { t: state.t, reason: "non-finite curve or derivative".into() })
    }
}

fn step_inner<K: Kernel + ?Sized>(
    state: &FilamentState,
    kernel: &K,
    dt: f64,
    scheme: Scheme,
    probe: Option<&mut RemainderProbe>,
) -> Result<FilamentState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let next = match scheme {
        Scheme::Euler => {
            let k1 = rhs(state, kernel)?;
            if let Some(p) = probe {
                let d = p.derivative(state, &p.values, &k1, kernel)?;
                p.values = axpy(&p.values, &d, dt);
            }
            advance(state, &k1, dt)
        }
        Scheme::Rk4 => {
            let k1 = rhs(state, kernel)?;
            let s2 = advance(state, &k1, 0.5 * dt);
            let k2 = rhs(&s2, kernel)?;
            let s3 = advance(state, &k2, 0.5 * dt);
            let k3 = rhs(&s3, kernel)?;
            let s4 = advance(state, &k3, dt);
            let k4 = rhs(&s4, kernel)?;
            if let Some(p) = probe {
                let r0 = p.values.clone();
                let q1 = p.derivative(state, &r0, &k1, kernel)?;
                let r2 = axpy(&r0, &q1, 0.5 * dt);
                let q2 = p.derivative(&s2, &r2, &k2, kernel)?;
                let r3 = axpy(&r0, &q2, 0.5 * dt);
                let q3 = p.derivative(&s3, &r3, &k3, kernel)?;
                let r4 = axpy(&r0, &q3, dt);
                let q4 = p.derivative(&s4, &r4, &k4, kernel)?;
                p.values = axpy(&r0, &combine_vec([&q1, &q2, &q3, &q4]), dt);
            }
            advance(state, &combine([&k1, &k2, &k3, &k4]), dt)
        }
    };
    check_finite(&next)?;
    Ok(next)
}

/// One time step of size `dt ≥ 0`.
pub fn step<K: Kernel + ?Sized>(state: &FilamentState, kernel: &K, dt: f64, scheme: Scheme) -> Result<FilamentState> {
    step_inner(state, kernel, dt, scheme, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub diagnostics_every: usize,
    /// Number of node pairs whose remainder is also evolved directly;
    /// 0 disables the cross-check.
    pub remainder_pairs: usize,
}

impl RunConfig {
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be > 0, got {}", self.t_final)));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::InvalidParameter("diagnostics_every must be at least 1".into()));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final || n < 1.0 {
            return Err(Error::InvalidParameter(format!("dt = {} does not divide T = {}", self.dt, self.t_final)));
        }
        Ok(n as usize)
    }
}

/// Norms and energy at one diagnostic time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub relative_drift: f64,
    pub sup_gamma: f64,
    pub sup_gamma_prime: f64,
    pub holder_gamma: f64,
    pub holder_gamma_prime: f64,
    pub remainder_holder: f64,
    /// `max |R_direct − R_def| / max |R_def|` over the probe pairs.
    pub remainder_discrepancy: Option<f64>,
}

impl DiagnosticSample {
    fn all_finite(&self) -> bool {
        [
            self.energy,
            self.sup_gamma,
            self.sup_gamma_prime,
            self.holder_gamma,
            self.holder_gamma_prime,
            self.remainder_holder,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub config: RunConfig,
    pub samples: Vec<DiagnosticSample>,
    pub constants: EnvelopeConstants,
    pub max_relative_drift: f64,
}

/// Sampled diagnostics and the states at each sample time.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagnostics: RunDiagnostics,
    pub states: Vec<FilamentState>,
    pub final_state: FilamentState,
}

pub const BLOW_UP_FACTOR: f64 = 1e6;

fn sample<K: Kernel + ?Sized>(state: &FilamentState, kernel: &K, step: usize, h0: Option<f64>, probe: Option<&RemainderProbe>) -> Result<DiagnosticSample> {
    let c = state.controlled();
    let energy = energy_rough(&c, kernel)?;
    let norm: ControlledNorm = c.controlled_norm();
    let h0 = h0.unwrap_or(energy);
    let relative_drift = if h0 != 0.0 { (energy - h0).abs() / h0.abs() } else { (energy - h0).abs() };
    let remainder_discrepancy = probe.map(|p| {
        let def = definitional(state, &p.pairs);
        let scale = def.iter().map(|v| linalg::norm(*v)).fold(0.0, f64::max);
        let diff = def.iter().zip(&p.values).map(|(a, b)| linalg::norm(linalg::sub(*a, *b))).fold(0.0, f64::max);
        if scale > 0.0 { diff / scale } else { diff }
    });
    Ok(DiagnosticSample {
        step,
        t: state.t,
        energy,
        relative_drift,
        sup_gamma: norm.sup_value,
        sup_gamma_prime: norm.derivative_sup,
        holder_gamma: norm.holder_value,
        holder_gamma_prime: norm.derivative_holder,
        remainder_holder: norm.remainder_holder,
        remainder_discrepancy,
    })
}

/// Marches to `T`, sampling diagnostics every `diagnostics_every` steps.
pub fn evolve<K: Kernel + ?Sized>(initial: &FilamentState, kernel: &K, config: RunConfig) -> Result<RunOutput> {
    let n_steps = config.n_steps()?;
    let mut probe = (config.remainder_pairs > 0).then(|| RemainderProbe::new(initial, config.remainder_pairs));
    let first = sample(initial, kernel, 0, None, probe.as_ref())?;
    let constants = EnvelopeConstants::fit(kernel, first.energy)?;
    let limit = BLOW_UP_FACTOR * first.sup_gamma_prime.max(f64::MIN_POSITIVE);
    let mut samples = vec![first];
    let mut states = vec![initial.clone()];
    let mut state = initial.clone();
    for k in 1..=n_steps {
        let mut next = step_inner(&state, kernel, config.dt, config.scheme, probe.as_mut())?;
        next.t = k as f64 * config.dt;
        state = next;
        let sup_prime = state.gamma_prime.iter().map(linalg::frobenius).fold(0.0, f64::max);
        if sup_prime > limit {
            return Err(Error::BlowUpSuspected { t: state.t, norm: sup_prime, limit });
        }
        if k % config.diagnostics_every == 0 || k == n_steps {
            let s = sample(&state, kernel, k, Some(first.energy), probe.as_ref())?;
            if !s.all_finite() {
                return Err(Error::StepRejected { t: state.t, reason: "non-finite diagnostic norm".into() });
            }
            samples.push(s);
            states.push(state.clone());
        }
    }
    let max_relative_drift = samples.iter().map(|s| s.relative_drift).fold(0.0, f64::max);
    Ok(RunOutput { diagnostics: RunDiagnostics { config, samples, constants, max_relative_drift }, states, final_state: state })
}

/// Constants of the a-priori envelopes, from the velocity bound at the
/// initial energy: `U₀ ≥ ‖u‖_∞`, `λ ≥ ‖∇u‖_∞`, `κ ≥ ‖∇²u‖_∞`.
/// `prefactor` multiplies every envelope and is 1 except in sensitivity
/// checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub energy: f64,
    pub u0: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub prefactor: f64,
}

impl EnvelopeConstants {
    pub fn fit<K: Kernel + ?Sized>(kernel: &K, energy: f64) -> Result<Self> {
        let c = |n| spectral_moment(kernel, n).map(|m| velocity_bound_constant(m, energy));
        Ok(Self { energy, u0: c(0)?, lambda: c(1)?, kappa: c(2)?, prefactor: 1.0 })
    }

    /// All constants, including the prefactor, multiplied by `f`.
    pub fn scaled(self, f: f64) -> Self {
        Self { u0: f * self.u0, lambda: f * self.lambda, kappa: f * self.kappa, prefactor: f * self.prefactor, ..self }
    }

    /// `(e^{λt} − 1)/λ`, continuous at `λ = 0`.
    fn growth(&self, t: f64) -> f64 {
        let x = self.lambda * t;
        if x.abs() < 1e-8 {
            t * (1.0 + 0.5 * x)
        } else {
            x.exp_m1() / self.lambda
        }
    }

    pub fn envelopes(&self, initial: &DiagnosticSample, t: f64) -> [f64; 5] {
        let e = (self.lambda * t).exp();
        let g = self.growth(t);
        let p = self.prefactor;
        [
            p * (initial.sup_gamma + self.u0 * t),
            p * initial.sup_gamma_prime * e,
            p * initial.holder_gamma * e,
            p * e * (initial.holder_gamma_prime + self.kappa * initial.holder_gamma * initial.sup_gamma_prime * g),
            p * e * (initial.remainder_holder + 0.5 * self.kappa * initial.holder_gamma.powi(2) * g),
        ]
    }
}

pub const ENVELOPE_NAMES: [&str; 5] = ["sup_gamma", "sup_gamma_prime", "holder_gamma", "holder_gamma_prime", "remainder_2nu"];

/// Relative slack for rounding in envelope comparisons at equality (t = 0).
const ENVELOPE_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub name: String,
    pub pass: bool,
    /// Largest `value / envelope` over the samples.
    pub worst_ratio: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub constants: EnvelopeConstants,
    pub checks: Vec<EnvelopeCheck>,
}

impl EnvelopeReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn gronwall_envelopes(diag: &RunDiagnostics) -> EnvelopeReport {
    gronwall_envelopes_with(diag, diag.constants)
}

pub fn gronwall_envelopes_with(diag: &RunDiagnostics, constants: EnvelopeConstants) -> EnvelopeReport {
    let first = diag.samples[0];
    let mut checks: Vec<EnvelopeCheck> = ENVELOPE_NAMES
        .iter()
        .map(|n| EnvelopeCheck { name: n.to_string(), pass: true, worst_ratio: 0.0, worst_t: 0.0 })
        .collect();
    for s in &diag.samples {
        let env = constants.envelopes(&first, s.t);
        let vals = [s.sup_gamma, s.sup_gamma_prime, s.holder_gamma, s.holder_gamma_prime, s.remainder_holder];
        for ((c, v), e) in checks.iter_mut().zip(vals).zip(env) {
            let ok = v <= e * (1.0 + ENVELOPE_ROUNDING) + 1e-300;
            let ratio = if e > 0.0 { v / e } else if v > 0.0 { f64::INFINITY } else { 0.0 };
            if ratio > c.worst_ratio {
                c.worst_ratio = ratio;
                c.worst_t = s.t;
            }
            c.pass &= ok;
        }
    }
    EnvelopeReport { constants, checks }
}
