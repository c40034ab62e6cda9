//! Regularized interaction kernels: the Rosenhead family
//! `φ_μ(z) = Γ (|z|² + μ²)^{-1/2}`, its derivatives, its radial Fourier
//! transform and the spectral moments used in velocity bounds.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::quadrature::gauss_legendre;

/// Value and derivative tensors of a scalar kernel at one point, up to
/// `order`. Higher tensors are flattened row-major (`d3[9i + 3j + k]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDerivatives {
    pub order: usize,
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [f64; 9],
    pub d3: [f64; 27],
    pub d4: [f64; 81],
}

impl KernelDerivatives {
    const ZERO: Self = Self { order: 0, value: 0.0, grad: [0.0; 3], hess: [0.0; 9], d3: [0.0; 27], d4: [0.0; 81] };

    /// Derivative tensor of order `k` as a flat slice of length `3^k`.
    pub fn tensor(&self, k: usize) -> &[f64] {
        match k {
            0 => std::slice::from_ref(&self.value),
            1 => &self.grad,
            2 => &self.hess,
            3 => &self.d3,
            4 => &self.d4,
            _ => panic!("order {k} not stored"),
        }
    }
}

/// A radially symmetric, even interaction kernel on ℝ³.
pub trait Kernel: Send + Sync + Debug {
    fn max_order(&self) -> usize;

    /// Value and derivatives up to `order` at `z`.
    fn derivatives(&self, z: Vec3, order: usize) -> Result<KernelDerivatives>;

    /// Radial profile `φ(r)`.
    fn radial(&self, r: f64) -> f64;

    /// Coefficient `c` of the far field `φ(r) ≈ c / r`.
    fn coulomb_coefficient(&self) -> f64;

    /// Length below which the kernel is regular.
    fn length_scale(&self) -> f64;

    /// `r φ(r) − c`, overridable for a cancellation-free form.
    fn far_field_remainder(&self, r: f64) -> f64 {
        r * self.radial(r) - self.coulomb_coefficient()
    }

    /// Radial Fourier transform `φ̂(|k|)`.
    fn fourier(&self, k: f64) -> Result<f64> {
        kernel_fourier(self, k)
    }

    fn spectral_table(&self) -> Result<Arc<SpectralTable>> {
        SpectralTable::build(self, DEFAULT_TABLE_POINTS).map(Arc::new)
    }
}

pub const DEFAULT_TABLE_POINTS: usize = 257;

/// Rosenhead kernel `Γ (|z|² + μ²)^{-1/2}` with derivatives to order 4.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma_strength: f64,
    pub mu: f64,
    pub table_points: usize,
    #[serde(skip)]
    table: OnceLock<Arc<SpectralTable>>,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        (self.gamma_strength, self.mu, self.table_points) == (other.gamma_strength, other.mu, other.table_points)
    }
}

impl KernelSpec {
    pub const MAX_ORDER: usize = 4;

    /// `Γ ≥ 0` (zero gives the trivial field) and `μ > 0`.
    pub fn rosenhead(gamma_strength: f64, mu: f64) -> Result<Self> {
        if !(gamma_strength >= 0.0 && gamma_strength.is_finite()) {
            return Err(Error::InvalidParameter(format!("circulation must be finite and ≥ 0, got {gamma_strength}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("regularization length must be > 0, got {mu}")));
        }
        Ok(Self { gamma_strength, mu, table_points: DEFAULT_TABLE_POINTS, table: OnceLock::new() })
    }

    pub fn with_table_points(mut self, n: usize) -> Result<Self> {
        if n < 9 || n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("table resolution must be odd and ≥ 9, got {n}")));
        }
        self.table_points = n;
        self.table = OnceLock::new();
        Ok(self)
    }

    /// `φ̂(k) = 4πΓ μ K₁(μk) / k`.
    pub fn fourier_closed_form(&self, k: f64) -> f64 {
        4.0 * PI * self.gamma_strength * self.mu * bessel_k1(self.mu * k) / k
    }

    /// `M_n = 16π² Γ μ^{-(2n+3)} 2^{2n+2} Γ(n + 3/2) Γ(n + 5/2)`, from the
    /// Mellin transform of `K₁`.
    pub fn moment_closed_form(&self, n: usize) -> f64 {
        let nf = n as f64;
        let gamma_half = |m: usize| -> f64 {
            // Γ(m + 1/2) = (2m)! √π / (4^m m!)
            (1..=m).fold(PI.sqrt(), |acc, j| acc * (j as f64 - 0.5))
        };
        16.0 * PI * PI * self.gamma_strength * self.mu.powf(-(2.0 * nf + 3.0))
            * 2f64.powf(2.0 * nf + 2.0)
            * gamma_half(n + 1)
            * gamma_half(n + 2)
    }
}

impl Kernel for KernelSpec {
    fn max_order(&self) -> usize {
        Self::MAX_ORDER
    }

    fn derivatives(&self, z: Vec3, order: usize) -> Result<KernelDerivatives> {
        if order > Self::MAX_ORDER {
            return Err(Error::OrderUnsupported { requested: order, max: Self::MAX_ORDER });
        }
        let g = self.gamma_strength;
        let s = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + self.mu * self.mu;
        // φ = Γ f(s) with f(s) = s^{-1/2} and ∂_i s = 2 z_i, ∂_ij s = 2 δ_ij
        let f0 = 1.0 / s.sqrt();
        let f1 = -0.5 * f0 / s;
        let f2 = -1.5 * f1 / s;
        let f3 = -2.5 * f2 / s;
        let f4 = -3.5 * f3 / s;
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut out = KernelDerivatives::ZERO;
        out.order = order;
        out.value = g * f0;
        if order >= 1 {
            for i in 0..3 {
                out.grad[i] = g * 2.0 * f1 * z[i];
            }
        }
        if order >= 2 {
            for i in 0..3 {
                for j in 0..3 {
                    out.hess[3 * i + j] = g * (4.0 * f2 * z[i] * z[j] + 2.0 * f1 * d(i, j));
                }
            }
        }
        if order >= 3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let sym = d(i, j) * z[k] + d(i, k) * z[j] + d(j, k) * z[i];
                        out.d3[9 * i + 3 * j + k] = g * (8.0 * f3 * z[i] * z[j] * z[k] + 4.0 * f2 * sym);
                    }
                }
            }
        }
        if order >= 4 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let zz = d(i, j) * z[k] * z[l]
                                + d(i, k) * z[j] * z[l]
                                + d(i, l) * z[j] * z[k]
                                + d(j, k) * z[i] * z[l]
                                + d(j, l) * z[i] * z[k]
                                + d(k, l) * z[i] * z[j];
                            let dd = d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k);
                            out.d4[27 * i + 9 * j + 3 * k + l] = g
                                * (16.0 * f4 * z[i] * z[j] * z[k] * z[l] + 8.0 * f3 * zz + 4.0 * f2 * dd);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn radial(&self, r: f64) -> f64 {
        self.gamma_strength / (r * r + self.mu * self.mu).sqrt()
    }

    fn coulomb_coefficient(&self) -> f64 {
        self.gamma_strength
    }

    fn length_scale(&self) -> f64 {
        self.mu
    }

    fn far_field_remainder(&self, r: f64) -> f64 {
        let q = (r * r + self.mu * self.mu).sqrt();
        -self.gamma_strength * self.mu * self.mu / (q * (r + q))
    }

    /// Closed form; [`kernel_fourier`] is the independent quadrature route.
    fn fourier(&self, k: f64) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!("|k| must be > 0, got {k}")));
        }
        Ok(self.fourier_closed_form(k))
    }

    fn spectral_table(&self) -> Result<Arc<SpectralTable>> {
        if let Some(t) = self.table.get() {
            return Ok(t.clone());
        }
        let t = Arc::new(SpectralTable::build(self, self.table_points)?);
        Ok(self.table.get_or_init(|| t).clone())
    }
}

/// Modified Bessel function `K₁(x)` for `x > 0`, from
/// `K₁(x) = ∫₀^∞ e^{-x cosh t} cosh t dt` with the trapezoidal rule, which
/// converges geometrically for this doubly-exponentially decaying integrand.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 needs x > 0");
    const H: f64 = 0.05;
    let mut sum = 0.5 * (-x).exp();
    let mut t = H;
    loop {
        let c = t.cosh();
        let term = (-x * c).exp() * c;
        sum += term;
        if term < 1e-18 * sum || x * c > 745.0 {
            break;
        }
        t += H;
    }
    sum * H
}

/// Damping parameters of the oscillatory transform, as multiples of `1/R`.
const DAMPING_BASE: f64 = 2.0;
const TRUNCATION_FACTOR: f64 = 2000.0;
const STABILITY_TOLERANCE: f64 = 1e-6;

/// `G(ε) = ∫₀^R sin(kr) e^{-εr} (r φ(r) − c) dr` for several `ε` at once.
fn damped_remainder_integrals<K: Kernel + ?Sized>(kernel: &K, k: f64, epsilons: &[f64], gl_points: usize) -> Vec<f64> {
    let mu = kernel.length_scale();
    let big_r = TRUNCATION_FACTOR * mu.max(1.0 / k);
    let (nodes, weights) = gauss_legendre(gl_points);
    let mut sums = vec![0.0; epsilons.len()];
    let mut a = 0.0;
    while a < big_r {
        let width = (PI / k).min((0.5 * mu).max(0.25 * a)).min(big_r - a);
        let (half, mid) = (0.5 * width, a + 0.5 * width);
        for (x, w) in nodes.iter().zip(&weights) {
            let r = mid + half * x;
            let base = w * half * (k * r).sin() * kernel.far_field_remainder(r);
            for (s, eps) in sums.iter_mut().zip(epsilons) {
                *s += base * (-eps * r).exp();
            }
        }
        a += width;
    }
    // ∫_R^∞ e^{ikr} f(r) dr = −e^{ikR} Σ_j (−1)^j f^{(j)}(R) / (ik)^{j+1}
    // for f = e^{−εr}(rφ − c), truncated after the second derivative.
    let h = 1e-3 * big_r;
    let g = |r: f64| kernel.far_field_remainder(r);
    let (g0, g1, g2) = (g(big_r), (g(big_r + h) - g(big_r - h)) / (2.0 * h), (g(big_r + h) - 2.0 * g(big_r) + g(big_r - h)) / (h * h));
    let phase = (k * big_r).sin_cos();
    for (s, eps) in sums.iter_mut().zip(epsilons) {
        let damp = (-eps * big_r).exp();
        let f = [damp * g0, damp * (g1 - eps * g0), damp * (g2 - 2.0 * eps * g1 + eps * eps * g0)];
        // (−1)^j / (ik)^{j+1} = (−1)^j (−i)^{j+1} / k^{j+1}
        let (mut re, mut im) = (0.0, 0.0);
        for (j, fj) in f.iter().enumerate() {
            let c = fj * (-1f64).powi(j as i32) / k.powi(j as i32 + 1);
            // (−i)^{j+1}: j=0 → −i, j=1 → −1, j=2 → i
            match j % 4 {
                0 => im -= c,
                1 => re -= c,
                2 => im += c,
                _ => re += c,
            }
        }
        // −e^{ikR}(re + i im), imaginary part
        *s -= phase.0 * re + phase.1 * im;
    }
    sums
}

/// Radial transform `φ̂(k) = (4π/k) ∫₀^∞ r sin(kr) φ(r) dr` by oscillatory
/// quadrature.
///
/// The Coulomb part `c/r` is integrated analytically under the damping
/// `e^{-εr}`; the absolutely integrable remainder `rφ − c` is integrated
/// numerically at `ε, ε/2, ε/4` and the three values are extrapolated to
/// `ε → 0`. The extrapolation must agree with the two-point extrapolation
/// from the smaller pair to `1e-6` relative.
pub fn kernel_fourier<K: Kernel + ?Sized>(kernel: &K, k: f64) -> Result<f64> {
    kernel_fourier_with_nodes(kernel, k, 8)
}

/// [`kernel_fourier`] with a chosen Gauss–Legendre order per panel.
pub fn kernel_fourier_with_nodes<K: Kernel + ?Sized>(kernel: &K, k: f64, gl_points: usize) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("|k| must be > 0, got {k}")));
    }
    let c = kernel.coulomb_coefficient();
    let big_r = TRUNCATION_FACTOR * kernel.length_scale().max(1.0 / k);
    let eps0 = DAMPING_BASE / big_r;
    let eps = [eps0, 0.5 * eps0, 0.25 * eps0];
    let g = damped_remainder_integrals(kernel, k, &eps, gl_points);
    let f: Vec<f64> = eps.iter().zip(&g).map(|(e, gi)| c * k / (k * k + e * e) + gi).collect();
    let three_point = (8.0 * f[2] - 6.0 * f[1] + f[0]) / 3.0;
    let two_point = 2.0 * f[2] - f[1];
    let scale = 4.0 * PI / k;
    let floor = 1e-12 * 4.0 * PI * c.abs() / (k * k);
    let (value, spread) = (scale * three_point, scale * (three_point - two_point).abs());
    if !value.is_finite() || spread > STABILITY_TOLERANCE * value.abs() + floor {
        return Err(Error::QuadratureFailure(format!(
            "damped transform at k = {k} did not stabilize (spread {spread:.3e}, value {value:.3e})"
        )));
    }
    Ok(value)
}

/// `φ̂` tabulated on a log-spaced radial grid, with spectral moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    pub k: Vec<f64>,
    pub phi_hat: Vec<f64>,
    /// `M_n = 4π ∫₀^∞ k^{2n+4} φ̂(k) dk`, `n = 0..3`.
    pub moments: [f64; 4],
    /// Fitted tail `φ̂(k) ≈ exp(a − b k) k^{-3/2}`.
    pub tail_log_amplitude: f64,
    pub tail_rate: f64,
    /// `(2π)^{-3} ∫ φ̂(k) d³k`, to be compared with `φ(0)`.
    pub parseval: f64,
    /// `lim_{k→0} k² φ̂(k)`, equal to `4π c` for a Coulomb far field.
    pub coulomb_limit: f64,
}

impl SpectralTable {
    pub const K_MIN: f64 = 1e-2;
    /// Upper end of the table in units of `1/μ`.
    pub const K_MAX_SCALE: f64 = 100.0;

    pub fn build<K: Kernel + ?Sized>(kernel: &K, points: usize) -> Result<Self> {
        let mu = kernel.length_scale();
        let (lo, hi) = (Self::K_MIN.min(0.1 / mu), Self::K_MAX_SCALE / mu);
        let step = (hi / lo).ln() / (points - 1) as f64;
        let k: Vec<f64> = (0..points).map(|i| lo * (step * i as f64).exp()).collect();
        let phi_hat: Vec<f64> = k.par_iter().map(|&kk| kernel.fourier(kk)).collect::<Result<_>>()?;
        Ok(Self::from_values(k, phi_hat, 4.0 * PI * kernel.coulomb_coefficient()))
    }

    /// Assemble a table from given samples (log-spaced `k`, odd count).
    pub fn from_values(k: Vec<f64>, phi_hat: Vec<f64>, coulomb_limit: f64) -> Self {
        let (a, b) = fit_tail(&k, &phi_hat);
        let mut table = Self {
            k,
            phi_hat,
            moments: [0.0; 4],
            tail_log_amplitude: a,
            tail_rate: b,
            parseval: 0.0,
            coulomb_limit,
        };
        for n in 0..4 {
            table.moments[n] = table.radial_moment(2 * n + 4);
        }
        table.parseval = table.radial_moment(2) / (2.0 * PI).powi(3);
        table
    }

    /// `4π ∫₀^∞ k^p φ̂(k) dk` for `p ≥ 2`: Coulomb piece below the grid,
    /// Simpson in `ln k` on the grid, fitted exponential tail above it.
    pub fn radial_moment(&self, p: usize) -> f64 {
        let n = self.k.len();
        let h = (self.k[n - 1] / self.k[0]).ln() / (n - 1) as f64;
        let f = |i: usize| self.k[i].powi(p as i32 + 1) * self.phi_hat[i];
        let mut simpson = f(0) + f(n - 1);
        for i in 1..n - 1 {
            simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
        }
        simpson *= h / 3.0;
        let k0 = self.k[0];
        let head = self.coulomb_limit * k0.powi(p as i32 - 1) / (p as f64 - 1.0);
        let tail = self.tail_moment(p);
        4.0 * PI * (head + simpson + tail)
    }

    fn tail_moment(&self, p: usize) -> f64 {
        let kmax = *self.k.last().expect("nonempty");
        if self.tail_log_amplitude == f64::NEG_INFINITY {
            // no positive samples left to fit: the transform has vanished
            return 0.0;
        }
        if !(self.tail_rate > 0.0) {
            return f64::INFINITY;
        }
        let span = 60.0 / self.tail_rate;
        let (nodes, weights) = gauss_legendre(32);
        let (half, mid) = (0.5 * span, kmax + 0.5 * span);
        nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                let kk = mid + half * x;
                w * half * kk.powf(p as f64 - 1.5) * (self.tail_log_amplitude - self.tail_rate * kk).exp()
            })
            .sum()
    }

    pub fn moment(&self, n: usize) -> Result<f64> {
        self.moments
            .get(n)
            .copied()
            .ok_or(Error::OrderUnsupported { requested: n, max: 3 })
    }
}

/// Least-squares fit of `ln(φ̂ k^{3/2}) = a − b k` over the upper quarter of
/// the grid, using only strictly positive samples.
fn fit_tail(k: &[f64], phi_hat: &[f64]) -> (f64, f64) {
    let start = 3 * k.len() / 4;
    let pts: Vec<(f64, f64)> = k[start..]
        .iter()
        .zip(&phi_hat[start..])
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&kk, &v)| (kk, (v * kk.powf(1.5)).ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, -slope)
}

pub fn spectral_moment<K: Kernel + ?Sized>(kernel: &K, n: usize) -> Result<f64> {
    if n > 3 {
        return Err(Error::OrderUnsupported { requested: n, max: 3 });
    }
    kernel.spectral_table()?.moment(n)
}

/// Outcome of checking the three kernel hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// (i) `φ(z) = φ(−z)` at sample points.
    pub even: bool,
    pub evenness_defect: f64,
    /// (ii) `φ̂ ≥ −1e-9 · max φ̂` on the table.
    pub nonnegative: bool,
    pub min_phi_hat: f64,
    /// (iii) `∫ (1 + |k|²)² φ̂ d³k < ∞`, by a decaying exponential tail and
    /// finite positive moments.
    pub finite_moment: bool,
    pub weighted_integral: f64,
    pub tail_rate: f64,
    pub parseval: f64,
    pub parseval_relative_error: f64,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.even && self.nonnegative && self.finite_moment
    }
}

const EVENNESS_SAMPLES: [Vec3; 6] =
    [[0.3, -0.2, 0.1], [1.0, 0.0, 0.0], [0.0, 2.5, -1.0], [-3.0, 0.7, 0.2], [0.05, 0.05, 0.05], [10.0, -4.0, 6.0]];

pub fn validate_hypothesis<K: Kernel + ?Sized>(kernel: &K) -> Result<HypothesisReport> {
    let table = kernel.spectral_table()?;
    let mut defect = 0.0_f64;
    for z in EVENNESS_SAMPLES {
        let a = kernel.derivatives(z, 0)?.value;
        let b = kernel.derivatives([-z[0], -z[1], -z[2]], 0)?.value;
        defect = defect.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
    }
    let phi0 = kernel.derivatives([0.0; 3], 0)?.value;
    Ok(validate_table(&table, defect, phi0))
}

/// Clause (ii) and (iii) checks on a given table; evenness is supplied.
pub fn validate_table(table: &SpectralTable, evenness_defect: f64, phi0: f64) -> HypothesisReport {
    let max = table.phi_hat.iter().copied().fold(0.0, f64::max);
    let min = table.phi_hat.iter().copied().fold(f64::INFINITY, f64::min);
    // ∫(1+k²)² φ̂ d³k = 4π ∫ (k² + 2k⁴ + k⁶) φ̂ dk
    let weighted = table.radial_moment(2) + 2.0 * table.radial_moment(4) + table.radial_moment(6);
    let finite = table.tail_rate > 0.0
        && weighted.is_finite()
        && weighted > 0.0
        && table.moments.iter().all(|m| m.is_finite() && *m > 0.0);
    HypothesisReport {
        even: evenness_defect <= 1e-14,
        evenness_defect,
        nonnegative: max > 0.0 && min >= -1e-9 * max,
        min_phi_hat: min,
        finite_moment: finite,
        weighted_integral: weighted,
        tail_rate: table.tail_rate,
        parseval: table.parseval,
        parseval_relative_error: (table.parseval - phi0).abs() / phi0.abs().max(f64::MIN_POSITIVE),
    }
}
