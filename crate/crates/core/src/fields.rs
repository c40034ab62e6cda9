//! Fields induced by a closed controlled curve: the velocity `u^γ` and its
//! gradients, the vector potential `ψ^γ`, and the energy in rough,
//! double-integral and Fourier forms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{self, Mat3, Vec3};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::rough_integral::{compose_smooth, rough_integral_total, Pairing, SmoothMap};
use crate::rough_path::{make_controlled, ControlledCurve, GridCurve};

#[inline]
fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Velocity and up to two of its gradients at one point.
///
/// `grad_u[m][i] = ∂_i u_m`, `grad2_u[9m + 3i + j] = ∂_i ∂_j u_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityEvaluation {
    pub x: Vec3,
    pub u: Vec3,
    pub grad_u: Option<Mat3>,
    pub grad2_u: Option<Vec<f64>>,
}

impl VelocityEvaluation {
    pub fn divergence(&self) -> Option<f64> {
        self.grad_u.map(|g| g[0][0] + g[1][1] + g[2][2])
    }

    /// Frobenius norm of `∇ⁿu`.
    pub fn gradient_norm(&self, n: usize) -> Option<f64> {
        match n {
            0 => Some(linalg::norm(self.u)),
            1 => self.grad_u.as_ref().map(linalg::frobenius),
            2 => self.grad2_u.as_ref().map(|v| linalg::euclid(v)),
            _ => None,
        }
    }
}

fn require_curve(c: &ControlledCurve) -> Result<()> {
    if c.dim() != 3 {
        return Err(Error::DimensionMismatch(format!("field source must be a curve in R^3, got dim {}", c.dim())));
    }
    Ok(())
}

/// `∇ⁿu(x) = ∮ ∇ⁿA(x − Y) dY` for `n = 0..=n_deriv`, with
/// `A_{mj}(z) = ε_{mpj} ∂_p φ(z)`, so that `A v = ∇φ × v`.
///
/// The integrand is controlled by the base of `c` with derivative
/// `−∇^{k+1}A(x − Y) Y′`; all orders are stacked into one matrix-valued
/// integrand and integrated with the compensated sum.
pub fn velocity<K: Kernel + ?Sized>(c: &ControlledCurve, kernel: &K, x: Vec3, n_deriv: usize) -> Result<VelocityEvaluation> {
    require_curve(c)?;
    if n_deriv > 2 {
        return Err(Error::OrderUnsupported { requested: n_deriv, max: 2 });
    }
    if kernel.max_order() < n_deriv + 2 {
        return Err(Error::InsufficientSmoothness { available: kernel.max_order(), required: n_deriv + 2 });
    }
    let n = c.n_points();
    let blocks: Vec<usize> = (0..=n_deriv).map(|k| 3usize.pow(k as u32)).collect();
    let rows: usize = blocks.iter().map(|b| 3 * b).sum();
    let (wdim, wdd) = (rows * 3, rows * 9);
    let mut values = vec![0.0; n * wdim];
    let mut derivative = vec![0.0; n * wdd];
    values
        .par_chunks_mut(wdim)
        .zip(derivative.par_chunks_mut(wdd))
        .enumerate()
        .try_for_each(|(i, (w, wp))| -> Result<()> {
            let y = c.value(i);
            let yp = c.derivative(i);
            let d = kernel.derivatives([x[0] - y[0], x[1] - y[1], x[2] - y[2]], n_deriv + 2)?;
            let mut row0 = 0;
            for (k, &b) in blocks.iter().enumerate() {
                let (tk1, tk2) = (d.tensor(k + 1), d.tensor(k + 2));
                for m in 0..3 {
                    for multi in 0..b {
                        let row = row0 + m * b + multi;
                        for j in 0..3 {
                            let mut val = 0.0;
                            let mut grad = [0.0; 3];
                            for p in 0..3 {
                                let e = levi_civita(m, p, j);
                                if e == 0.0 {
                                    continue;
                                }
                                val += e * tk1[p * b + multi];
                                for q in 0..3 {
                                    grad[q] += e * tk2[(p * b + multi) * 3 + q];
                                }
                            }
                            w[row * 3 + j] = val;
                            for a in 0..3 {
                                wp[(row * 3 + j) * 3 + a] = -(0..3).map(|q| grad[q] * yp[3 * q + a]).sum::<f64>();
                            }
                        }
                    }
                }
                row0 += 3 * b;
            }
            Ok(())
        })?;
    let integrand = make_controlled(wdim, values, derivative, c.base().clone())?;
    let out = rough_integral_total(&integrand, c, Pairing::MatVec { rows })?;
    let u = [out[0], out[1], out[2]];
    let grad_u = (n_deriv >= 1).then(|| {
        let mut g = [[0.0; 3]; 3];
        for m in 0..3 {
            for i in 0..3 {
                g[m][i] = out[3 + 3 * m + i];
            }
        }
        g
    });
    let grad2_u = (n_deriv >= 2).then(|| out[12..39].to_vec());
    Ok(VelocityEvaluation { x, u, grad_u, grad2_u })
}

/// `ψ(x) = ∮ φ(x − γ) dγ` together with `∇ψ`, returned as
/// `(ψ, J)` with `J[j][i] = ∂_i ψ_j`.
pub fn vector_potential_with_gradient<K: Kernel + ?Sized>(
    c: &ControlledCurve,
    kernel: &K,
    x: Vec3,
) -> Result<(Vec3, Mat3)> {
    require_curve(c)?;
    if kernel.max_order() < 2 {
        return Err(Error::InsufficientSmoothness { available: kernel.max_order(), required: 2 });
    }
    let n = c.n_points();
    let mut values = vec![0.0; n * 4];
    let mut derivative = vec![0.0; n * 12];
    for i in 0..n {
        let y = c.value(i);
        let yp = c.derivative(i);
        let d = kernel.derivatives([x[0] - y[0], x[1] - y[1], x[2] - y[2]], 2)?;
        values[4 * i] = d.value;
        values[4 * i + 1..4 * i + 4].copy_from_slice(&d.grad);
        for a in 0..3 {
            derivative[12 * i + a] = -(0..3).map(|q| d.grad[q] * yp[3 * q + a]).sum::<f64>();
            for r in 0..3 {
                derivative[12 * i + 3 * (1 + r) + a] = -(0..3).map(|q| d.hess[3 * r + q] * yp[3 * q + a]).sum::<f64>();
            }
        }
    }
    let integrand = make_controlled(4, values, derivative, c.base().clone())?;
    let out = rough_integral_total(&integrand, c, Pairing::Outer)?;
    let psi = [out[0], out[1], out[2]];
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            jac[j][i] = out[3 * (1 + i) + j];
        }
    }
    Ok((psi, jac))
}

pub fn vector_potential<K: Kernel + ?Sized>(c: &ControlledCurve, kernel: &K, x: Vec3) -> Result<Vec3> {
    vector_potential_with_gradient(c, kernel, x).map(|(p, _)| p)
}

/// `x ↦ ψ^γ(x)` as a smooth map, for composition with the curve itself.
struct PotentialMap<'a, K: Kernel + ?Sized> {
    curve: &'a ControlledCurve,
    kernel: &'a K,
}

impl<K: Kernel + ?Sized> SmoothMap for PotentialMap<'_, K> {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn order(&self) -> usize {
        self.kernel.max_order().saturating_sub(2)
    }
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>) {
        let (psi, jac) =
            vector_potential_with_gradient(self.curve, self.kernel, [x[0], x[1], x[2]]).expect("curve and kernel validated");
        value.copy_from_slice(&psi);
        if let Some(j) = jacobian {
            j.copy_from_slice(&linalg::flatten(&jac));
        }
    }
}

/// `H = ½ ∮ ψ^γ(γ) · dγ`, with `ψ^γ(γ)` controlled through composition.
pub fn energy_rough<K: Kernel + ?Sized>(c: &ControlledCurve, kernel: &K) -> Result<f64> {
    require_curve(c)?;
    if kernel.max_order() < 4 {
        return Err(Error::InsufficientSmoothness { available: kernel.max_order(), required: 4 });
    }
    let map = PotentialMap { curve: c, kernel };
    let psi_of_gamma = compose_smooth(&map, c)?;
    Ok(0.5 * rough_integral_total(&psi_of_gamma, c, Pairing::Dot)?[0])
}

fn require_smooth(nu: f64) -> Result<()> {
    if nu <= 0.5 {
        return Err(Error::ExponentTooLow { nu, requirement: "double-integral energy needs ν > 1/2" });
    }
    Ok(())
}

/// `½ ΣΣ φ(γ_i − γ_j) ⟨Δγ_i, Δγ_j⟩` with forward increments.
pub fn energy_double_integral<K: Kernel + ?Sized>(samples: &GridCurve, kernel: &K, nu: f64) -> Result<f64> {
    require_smooth(nu)?;
    let n = samples.n_points();
    let inc: Vec<Vec3> = (0..n).map(|i| samples.increment(i)).collect();
    double_sum(samples, &inc, kernel)
}

/// Double integral with the exact trigonometric-interpolant tangent
/// `γ′(ξ_i)/N`, obtained by FFT differentiation.
pub fn energy_double_integral_spectral<K: Kernel + ?Sized>(samples: &GridCurve, kernel: &K, nu: f64) -> Result<f64> {
    require_smooth(nu)?;
    let tangent = spectral_tangent(samples);
    let n = samples.n_points() as f64;
    let scaled: Vec<Vec3> = tangent.iter().map(|t| linalg::scale(*t, 1.0 / n)).collect();
    double_sum(samples, &scaled, kernel)
}

fn double_sum<K: Kernel + ?Sized>(samples: &GridCurve, weights: &[Vec3], kernel: &K) -> Result<f64> {
    let pts = samples.points();
    let rows: Vec<f64> = pts
        .par_iter()
        .zip(weights.par_iter())
        .map(|(p, wi)| -> Result<f64> {
            let mut acc = 0.0;
            for (q, wj) in pts.iter().zip(weights) {
                acc += kernel.derivatives(linalg::sub(*p, *q), 0)?.value * linalg::dot(*wi, *wj);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(0.5 * rows.iter().sum::<f64>())
}

/// `dγ/dξ` at the nodes from the trigonometric interpolant (Nyquist mode
/// dropped).
pub fn spectral_tangent(samples: &GridCurve) -> Vec<Vec3> {
    let n = samples.n_points();
    let mut planner = FftPlanner::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let mut out = vec![[0.0; 3]; n];
    for c in 0..3 {
        let mut buf: Vec<Complex<f64>> = samples.points().iter().map(|p| Complex::new(p[c], 0.0)).collect();
        fwd.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let freq = if k < n / 2 {
                k as f64
            } else if k == n / 2 {
                0.0
            } else {
                k as f64 - n as f64
            };
            *v *= Complex::new(0.0, 2.0 * PI * freq);
        }
        inv.process(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            o[c] = v.re / n as f64;
        }
    }
    out
}

/// Spherical quadrature for the Fourier form of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KQuadrature {
    /// Upper radial cutoff in units of `1/μ`.
    pub k_max_scale: f64,
    pub radial_panels: usize,
    pub radial_points_per_panel: usize,
    /// Gauss–Legendre nodes in `cos θ`; the azimuth uses twice as many
    /// trapezoidal nodes.
    pub polar_points: usize,
}

impl Default for KQuadrature {
    fn default() -> Self {
        Self { k_max_scale: 30.0, radial_panels: 8, radial_points_per_panel: 8, polar_points: 24 }
    }
}

impl KQuadrature {
    pub fn doubled(self) -> Self {
        Self {
            radial_panels: 2 * self.radial_panels,
            polar_points: 2 * self.polar_points,
            ..self
        }
    }

    /// Nodes `k` and weights for `∫ f(k) d³k`.
    pub fn nodes(&self, mu: f64) -> Vec<(Vec3, f64)> {
        let kmax = self.k_max_scale / mu;
        let width = kmax / self.radial_panels as f64;
        let mut radial = Vec::new();
        for p in 0..self.radial_panels {
            let (x, w) = gauss_legendre_on(self.radial_points_per_panel, p as f64 * width, (p + 1) as f64 * width);
            radial.extend(x.into_iter().zip(w));
        }
        let (ct, wt) = gauss_legendre(self.polar_points);
        let n_phi = 2 * self.polar_points;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut out = Vec::with_capacity(radial.len() * ct.len() * n_phi);
        for &(k, wk) in &radial {
            for (c, w_c) in ct.iter().zip(&wt) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..n_phi {
                    let ph = j as f64 * dphi;
                    out.push(([k * s * ph.cos(), k * s * ph.sin(), k * c], wk * k * k * w_c * dphi));
                }
            }
        }
        out
    }
}

/// `x ↦ (cos⟨k,x⟩, sin⟨k,x⟩)`.
struct Plane {
    k: Vec3,
}

impl SmoothMap for Plane {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        2
    }
    fn order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>) {
        let (s, c) = (self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2]).sin_cos();
        value[0] = c;
        value[1] = s;
        if let Some(j) = jacobian {
            for a in 0..3 {
                j[a] = -s * self.k[a];
                j[3 + a] = c * self.k[a];
            }
        }
    }
}

/// `|∮ e^{i⟨k,γ⟩} dγ|²` through the rough integral of the composed plane wave.
pub fn fourier_line_integral_sq(c: &ControlledCurve, k: Vec3) -> Result<f64> {
    let wave = compose_smooth(&Plane { k }, c)?;
    let v = rough_integral_total(&wave, c, Pairing::Outer)?;
    Ok(v.iter().map(|x| x * x).sum())
}

/// `H = ½ (2π)^{-3} ∫ φ̂(k) |∮ e^{i⟨k,γ⟩} dγ|² d³k`.
pub fn energy_fourier<K: Kernel + ?Sized>(c: &ControlledCurve, kernel: &K, quad: KQuadrature) -> Result<f64> {
    require_curve(c)?;
    let nodes = quad.nodes(kernel.length_scale());
    let total: f64 = nodes
        .par_iter()
        .map(|&(k, w)| -> Result<f64> {
            let kk = linalg::norm(k);
            if kk == 0.0 {
                return Ok(0.0);
            }
            let phi_hat = kernel.fourier(kk)?;
            Ok(w * phi_hat.max(0.0) * fourier_line_integral_sq(c, k)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(0.5 * total / (2.0 * PI).powi(3))
}

/// Fourier energy with a resolution-doubling check.
pub fn energy_fourier_checked<K: Kernel + ?Sized>(
    c: &ControlledCurve,
    kernel: &K,
    quad: KQuadrature,
    tolerance: f64,
) -> Result<f64> {
    let (a, b) = (energy_fourier(c, kernel, quad)?, energy_fourier(c, kernel, quad.doubled())?);
    let scale = a.abs().max(b.abs());
    if (a - b).abs() > tolerance * scale + 1e-300 {
        return Err(Error::QuadratureFailure(format!("k-quadrature not converged: {a:.10e} vs {b:.10e} after doubling")));
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub h_rough: f64,
    pub h_double: Option<f64>,
    pub h_fourier: Option<f64>,
    /// Largest pairwise relative difference among the available values.
    pub agreement: f64,
}

/// All energy forms available for this curve: the double integral only in
/// smooth mode (`ν > 1/2`), the Fourier form only when requested.
pub fn energy_report<K: Kernel + ?Sized>(c: &ControlledCurve, kernel: &K, fourier: Option<KQuadrature>) -> Result<EnergyReport> {
    let h_rough = energy_rough(c, kernel)?;
    let curve = c.curve().expect("curve checked");
    let nu = c.base().nu();
    let h_double = if nu > 0.5 { Some(energy_double_integral_spectral(&curve, kernel, nu)?) } else { None };
    let h_fourier = fourier.map(|q| energy_fourier(c, kernel, q)).transpose()?;
    let vals: Vec<f64> = [Some(h_rough), h_double, h_fourier].into_iter().flatten().collect();
    let mut agreement = 0.0_f64;
    for (i, a) in vals.iter().enumerate() {
        for b in &vals[..i] {
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                agreement = agreement.max((a - b).abs() / scale);
            }
        }
    }
    Ok(EnergyReport { h_rough, h_double, h_fourier, agreement })
}

/// `(2π)^{-3/2} M_n^{1/2} E^{1/2}` with `E = (2π)^{-3} ∫ φ̂ |∮ e^{i⟨k,γ⟩} dγ|² d³k`
/// (`= 2H`), the Cauchy–Schwarz bound on `‖∇ⁿu‖_∞`.
pub fn velocity_bound_constant(moment: f64, energy: f64) -> f64 {
    (2.0 * PI).powf(-1.5) * moment.max(0.0).sqrt() * (2.0 * energy.max(0.0)).sqrt()
}

/// Sample points for sup-norm estimates: all nodes plus `per_radius`
/// offsets at each radius in `{μ/2, μ, 2μ}` from random nodes in random
/// directions (fixed seed).
pub fn sample_points(curve: &GridCurve, mu: f64, per_radius: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec3> = curve.points().to_vec();
    for radius in [0.5 * mu, mu, 2.0 * mu] {
        for _ in 0..per_radius {
            let node = curve.point(rng.random_range(0..curve.n_points()));
            let dir = loop {
                let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let r = linalg::norm(v);
                if r > 1e-3 && r <= 1.0 {
                    break linalg::scale(v, 1.0 / r);
                }
            };
            pts.push(linalg::add(node, linalg::scale(dir, radius)));
        }
    }
    pts
}

pub const BOUND_OFFSETS_PER_RADIUS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityBoundReport {
    pub n: usize,
    pub max_sampled: f64,
    pub bound: f64,
    /// `max_sampled / bound` (0 when both vanish).
    pub slack_ratio: f64,
    pub points: usize,
    pub pass: bool,
}

/// Sampled `sup ‖∇ⁿu‖` against the spectral bound for the given energy.
pub fn velocity_bound_check<K: Kernel + ?Sized>(
    c: &ControlledCurve,
    kernel: &K,
    n: usize,
    energy: f64,
) -> Result<VelocityBoundReport> {
    let moment = crate::kernel::spectral_moment(kernel, n)?;
    let curve = c.curve().ok_or_else(|| Error::DimensionMismatch("curve in R^3 expected".into()))?;
    let pts = sample_points(&curve, kernel.length_scale(), BOUND_OFFSETS_PER_RADIUS, 0xb0_0d);
    let max_sampled = pts
        .par_iter()
        .map(|&x| velocity(c, kernel, x, n).map(|v| v.gradient_norm(n).expect("order computed")))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let bound = velocity_bound_constant(moment, energy);
    let slack_ratio = if bound > 0.0 { max_sampled / bound } else { 0.0 };
    Ok(VelocityBoundReport { n, max_sampled, bound, slack_ratio, points: pts.len(), pass: max_sampled <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::rough_path::{circle, lift_piecewise_linear};
    use std::sync::Arc;

    fn circle_curve(n: usize) -> ControlledCurve {
        ControlledCurve::identity(Arc::new(lift_piecewise_linear(&circle(n, 1.0).unwrap(), 0.9).unwrap()))
    }

    fn point_curve() -> ControlledCurve {
        let base = Arc::new(lift_piecewise_linear(&GridCurve::from_fn(16, |_| [0.2, 0.1, 0.0]).unwrap(), 0.9).unwrap());
        ControlledCurve::identity(base)
    }

    #[test]
    fn point_curve_has_no_field() {
        let k = KernelSpec::rosenhead(1.0, 1.0).unwrap();
        let p = point_curve();
        let v = velocity(&p, &k, [1.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(v.u, [0.0; 3]);
        assert_eq!(vector_potential(&p, &k, [0.3, 0.0, 0.0]).unwrap(), [0.0; 3]);
        assert_eq!(energy_rough(&p, &k).unwrap(), 0.0);
        assert_eq!(energy_double_integral(p.base().x(), &k, 0.9).unwrap(), 0.0);
        assert_eq!(energy_fourier(&p, &k, KQuadrature::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_kernel_potential_vanishes() {
        // Γ = 0 leaves only the regular part; with μ huge φ is nearly constant
        let k = KernelSpec::rosenhead(1.0, 1e8).unwrap();
        let psi = vector_potential(&circle_curve(64), &k, [0.1, 0.2, 0.3]).unwrap();
        assert!(psi.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn axial_velocity_on_symmetry_axis() {
        let k = KernelSpec::rosenhead(1.0, 0.5).unwrap();
        let c = circle_curve(512);
        let v = velocity(&c, &k, [0.0, 0.0, 1.0], 0).unwrap();
        assert!(v.u[0].abs() < 1e-10 && v.u[1].abs() < 1e-10);
        // fine scalar quadrature of ∮ ∇φ(x − y) × dy along the exact circle
        let m = 100_000;
        let mut axial = 0.0;
        for i in 0..m {
            let th = 2.0 * PI * (i as f64 + 0.5) / m as f64;
            let y = [th.cos(), th.sin(), 0.0];
            let dy = [-th.sin() * 2.0 * PI / m as f64, th.cos() * 2.0 * PI / m as f64, 0.0];
            let g = k.derivatives(linalg::sub([0.0, 0.0, 1.0], y), 1).unwrap().grad;
            axial += linalg::cross(g, dy)[2];
        }
        // the polygon and the circle differ by O(N^-2)
        assert!((v.u[2] - axial).abs() < 1e-4 * axial.abs(), "{} vs {}", v.u[2], axial);
    }

    #[test]
    fn spectral_tangent_of_circle() {
        let c = circle(32, 1.0).unwrap();
        let t = spectral_tangent(&c);
        for (i, ti) in t.iter().enumerate() {
            let th = 2.0 * PI * i as f64 / 32.0;
            assert!((ti[0] + 2.0 * PI * th.sin()).abs() < 1e-12);
            assert!((ti[1] - 2.0 * PI * th.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn retraced_segment_has_zero_energy() {
        let curve = GridCurve::from_fn(128, |xi| [(2.0 * PI * xi).cos(), 0.0, 0.0]).unwrap();
        let k = KernelSpec::rosenhead(1.0, 1.0).unwrap();
        let d = energy_double_integral_spectral(&curve, &k, 0.9).unwrap();
        let c = ControlledCurve::identity(Arc::new(lift_piecewise_linear(&curve, 0.9).unwrap()));
        let f = energy_fourier(&c, &k, KQuadrature::default()).unwrap();
        // exact value 0; the compensated sum pairs segments with opposite base points
        assert!(d.abs() < 1e-10, "{d}");
        assert!((0.0..1e-8).contains(&f), "{f}");
    }

    #[test]
    fn energy_requires_smooth_kernel_and_mode() {
        let k = KernelSpec::rosenhead(1.0, 1.0).unwrap();
        assert!(energy_double_integral(&circle(16, 1.0).unwrap(), &k, 0.4).is_err());
    }
}
