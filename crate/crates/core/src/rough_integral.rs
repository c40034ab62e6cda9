//! Compensated Riemann sums against a controlled integrator, the Young fast
//! path, the local remainder `Q`, and composition with smooth maps.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle_algebra::{holder_norm_2, HolderOptions, TwoParamGrid};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::gauss_legendre;
use crate::rough_path::{make_controlled, ControlledCurve, RoughPath};

/// How integrand values pair with increments of the integrator.
///
/// With `W′ ∈ L(ℝ³, ℝ^wdim)` and `Z′ ∈ L(ℝ³, ℝ^zdim)` the second-order term
/// always contracts as `Σ_{a,b} W′_{·a} Z′_{·b} 𝕏²^{ab}`; the variants only
/// fix how the value indices of `W` and `Z` combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// `wdim == zdim`, scalar output `Σ_m W^m dZ^m`.
    Dot,
    /// `W` is a row-major `rows × zdim` matrix, output `W dZ` of length `rows`.
    MatVec { rows: usize },
    /// Output `W ⊗ dZ`, `out[j·zdim + m] = W^j dZ^m`.
    Outer,
}

impl Pairing {
    pub fn output_dim(self, wdim: usize, zdim: usize) -> Result<usize> {
        match self {
            Pairing::Dot if wdim == zdim => Ok(1),
            Pairing::MatVec { rows } if rows * zdim == wdim => Ok(rows),
            Pairing::Outer => Ok(wdim * zdim),
            _ => Err(Error::DimensionMismatch(format!("{self:?} with wdim={wdim}, zdim={zdim}"))),
        }
    }

    /// `out += W·dz + Σ W′ Z′ A` for one node.
    #[inline]
    fn accumulate(
        self,
        w: &[f64],
        wp: &[f64],
        dz: &[f64],
        zp: &[f64],
        area: &[f64],
        out: &mut [f64],
    ) {
        let zdim = dz.len();
        // ZA[m][a] = Σ_b Z′[m][b] A[a][b]
        let mut buf = [0.0; 3 * MAX_INTEGRATOR_DIM];
        let za = &mut buf[..3 * zdim];
        for m in 0..zdim {
            for a in 0..3 {
                za[3 * m + a] = (0..3).map(|b| zp[3 * m + b] * area[3 * a + b]).sum();
            }
        }
        let second = |j: usize, m: usize| -> f64 { (0..3).map(|a| wp[3 * j + a] * za[3 * m + a]).sum() };
        match self {
            Pairing::Dot => {
                for m in 0..zdim {
                    out[0] += w[m] * dz[m] + second(m, m);
                }
            }
            Pairing::MatVec { rows } => {
                for r in 0..rows {
                    let mut acc = 0.0;
                    for m in 0..zdim {
                        let j = r * zdim + m;
                        acc += w[j] * dz[m] + second(j, m);
                    }
                    out[r] += acc;
                }
            }
            Pairing::Outer => {
                for j in 0..w.len() {
                    for m in 0..zdim {
                        out[j * zdim + m] += w[j] * dz[m] + second(j, m);
                    }
                }
            }
        }
    }
}

/// Largest integrator dimension; keeps the per-node scratch on the stack.
pub const MAX_INTEGRATOR_DIM: usize = 16;

fn same_base(a: &Arc<RoughPath>, b: &Arc<RoughPath>) -> bool {
    Arc::ptr_eq(a, b) || (a.nu() == b.nu() && a.x() == b.x() && a.area() == b.area())
}

fn check_inputs(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing) -> Result<usize> {
    if !same_base(w.base(), z.base()) {
        return Err(Error::BaseMismatch);
    }
    let nu = w.base().nu();
    if 3.0 * nu <= 1.0 {
        return Err(Error::ExponentTooLow { nu, requirement: "rough integral needs 3ν > 1" });
    }
    if z.dim() > MAX_INTEGRATOR_DIM {
        return Err(Error::DimensionMismatch(format!("integrator dimension {} > {MAX_INTEGRATOR_DIM}", z.dim())));
    }
    pairing.output_dim(w.dim(), z.dim())
}

/// Compensated sum `Σ_i [W_i (Z_{i+1} − Z_i) + W′_i Z′_i 𝕏²(ξ_{i+1}, ξ_i)]`
/// over nodes `from..to` (chart indices, `to ≤ N`).
fn compensated_range(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing, from: usize, to: usize, out: &mut [f64]) {
    let base = w.base();
    let zdim = z.dim();
    let mut dz = vec![0.0; zdim];
    for i in from..to {
        let (z0, z1) = (z.value(i), z.value(i + 1));
        for m in 0..zdim {
            dz[m] = z1[m] - z0[m];
        }
        let area = base.area().get(i + 1, i);
        pairing.accumulate(w.value(i), w.derivative(i), &dz, z.derivative(i), area, out);
    }
}

/// Full-loop rough integral `∮ W dZ`.
pub fn rough_integral_total(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing) -> Result<Vec<f64>> {
    let dim = check_inputs(w, z, pairing)?;
    let mut out = vec![0.0; dim];
    compensated_range(w, z, pairing, 0, w.n_points(), &mut out);
    Ok(out)
}

/// Rough integral with all partial integrals and the remainder norm.
#[derive(Debug, Clone)]
pub struct IntegralResult {
    pub total: Vec<f64>,
    /// `partials(t, s) = ∫_{ξ_s}^{ξ_t} W dZ` on the `(N + 1)²` chart grid.
    pub partials: TwoParamGrid,
    pub pairing: Pairing,
    /// `‖Q‖_{3ν}` over chart-local pairs.
    pub q_norm: f64,
}

/// Local approximation `W(s)(Z(t) − Z(s)) + W′(s) Z′(s) 𝕏²(t, s)` on all pairs.
pub fn local_germ(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing) -> Result<TwoParamGrid> {
    let dim = check_inputs(w, z, pairing)?;
    let n = w.n_points();
    let base = w.base().clone();
    let zdim = z.dim();
    Ok(TwoParamGrid::from_fn(n, n + 1, dim, |t, s, out| {
        let mut dz = [0.0; MAX_INTEGRATOR_DIM];
        let (zt, zs) = (z.value(t), z.value(s));
        for m in 0..zdim {
            dz[m] = zt[m] - zs[m];
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        pairing.accumulate(w.value(s), w.derivative(s), &dz[..zdim], z.derivative(s), base.area().get(t, s), out);
    }))
}

pub fn rough_integral(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing) -> Result<IntegralResult> {
    let dim = check_inputs(w, z, pairing)?;
    let n = w.n_points();
    let size = n + 1;
    // cumulative sums S_k = ∫_0^{ξ_k}
    let mut cumulative = vec![0.0; size * dim];
    for k in 1..size {
        let (prev, cur) = cumulative.split_at_mut(k * dim);
        let cur = &mut cur[..dim];
        cur.copy_from_slice(&prev[(k - 1) * dim..]);
        compensated_range(w, z, pairing, k - 1, k, cur);
    }
    let partials = TwoParamGrid::from_fn(n, size, dim, |t, s, out| {
        for c in 0..dim {
            out[c] = cumulative[t * dim + c] - cumulative[s * dim + c];
        }
    });
    let total = cumulative[n * dim..].to_vec();
    let mut result = IntegralResult { total, partials, pairing, q_norm: 0.0 };
    let q = q_grid(&result, w, z)?;
    result.q_norm = holder_norm_2(&q, 3.0 * w.base().nu(), HolderOptions::local());
    Ok(result)
}

/// `Q(t, s) = ∫_s^t W dZ − W(s)(Z(t) − Z(s)) − W′(s) Z′(s) 𝕏²(t, s)`.
pub fn q_grid(result: &IntegralResult, w: &ControlledCurve, z: &ControlledCurve) -> Result<TwoParamGrid> {
    let germ = local_germ(w, z, result.pairing)?;
    let mut q = result.partials.clone();
    q.data.par_iter_mut().zip(germ.data.par_iter()).for_each(|(a, b)| *a -= b);
    Ok(q)
}

/// `‖Q‖_{3ν}` against the size of its a-priori bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    pub q_norm: f64,
    /// `(1 + |X|_ν + |𝕏²|_{2ν}) ‖W‖ ‖Z‖` with `‖·‖ = full_norm + sup|·′|`.
    pub bound_without_constant: f64,
    /// `q_norm / bound_without_constant`, the fitted constant.
    pub ratio: f64,
}

pub fn q_remainder(result: &IntegralResult, w: &ControlledCurve, z: &ControlledCurve) -> QReport {
    let base = w.base();
    let (nw, nz) = (w.controlled_norm(), z.controlled_norm());
    let bound = (1.0 + base.holder_x() + base.holder_area())
        * (nw.full_norm + nw.derivative_sup)
        * (nz.full_norm + nz.derivative_sup);
    let ratio = if bound > 0.0 { result.q_norm / bound } else { 0.0 };
    QReport { q_norm: result.q_norm, bound_without_constant: bound, ratio }
}

/// First-order Riemann–Stieltjes sum `Σ W_i (Z_{i+1} − Z_i)`; derivatives are
/// ignored. Only meaningful for `ν > 1/2`.
pub fn young_integral(w: &ControlledCurve, z: &ControlledCurve, pairing: Pairing) -> Result<Vec<f64>> {
    let nu = w.base().nu();
    if nu <= 0.5 {
        return Err(Error::ExponentTooLow { nu, requirement: "Young integral needs ν > 1/2" });
    }
    let dim = check_inputs(w, z, pairing)?;
    let zdim = z.dim();
    let (wp, zp, area) = (vec![0.0; w.dim() * 3], vec![0.0; zdim * 3], [0.0; 9]);
    let mut out = vec![0.0; dim];
    let mut dz = vec![0.0; zdim];
    for i in 0..w.n_points() {
        let (z0, z1) = (z.value(i), z.value(i + 1));
        for m in 0..zdim {
            dz[m] = z1[m] - z0[m];
        }
        pairing.accumulate(w.value(i), &wp, &dz, &zp, &area, &mut out);
    }
    Ok(out)
}

/// A smooth map `ℝ^in → ℝ^out` with its Jacobian.
pub trait SmoothMap: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Highest derivative order the map can supply.
    fn order(&self) -> usize;
    /// Writes `m(x)` and, when requested, the row-major `out × in` Jacobian.
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>);
}

/// Minimum derivative order for composition; the remainder formula uses the
/// Jacobian along segments and its bound needs one more derivative.
pub const COMPOSE_MIN_ORDER: usize = 2;

fn check_map(map: &dyn SmoothMap, c: &ControlledCurve) -> Result<()> {
    if map.order() < COMPOSE_MIN_ORDER {
        return Err(Error::InsufficientSmoothness { available: map.order(), required: COMPOSE_MIN_ORDER });
    }
    if map.in_dim() != c.dim() {
        return Err(Error::DimensionMismatch(format!("map input {} vs curve {}", map.in_dim(), c.dim())));
    }
    Ok(())
}

/// `(m(Y), Dm(Y) Y′)` as a curve controlled by the same base.
pub fn compose_smooth(map: &dyn SmoothMap, c: &ControlledCurve) -> Result<ControlledCurve> {
    check_map(map, c)?;
    let (n, din, dout) = (c.n_points(), c.dim(), map.out_dim());
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut v = vec![0.0; dout];
            let mut jac = vec![0.0; dout * din];
            map.eval(c.value(i), &mut v, Some(&mut jac));
            let yp = c.derivative(i);
            let mut d = vec![0.0; dout * 3];
            for o in 0..dout {
                for a in 0..3 {
                    d[3 * o + a] = (0..din).map(|k| jac[o * din + k] * yp[3 * k + a]).sum();
                }
            }
            (v, d)
        })
        .collect();
    let (values, derivative): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_node.into_iter().unzip();
    make_controlled(dout, values.concat(), derivative.concat(), c.base().clone())
}

const REMAINDER_QUADRATURE_POINTS: usize = 16;

/// Remainder of `m(Y)` from the expansion
/// `R^m(ξ,η) = Dm(Y_η) R(ξ,η) + ∫₀¹ [Dm(Y_η + r ΔY) − Dm(Y_η)] dr · ΔY`,
/// `ΔY = Y_ξ − Y_η`, with a 16-point Gauss–Legendre rule in `r`.
pub fn remainder_by_expansion(map: &dyn SmoothMap, c: &ControlledCurve) -> Result<TwoParamGrid> {
    check_map(map, c)?;
    let (n, din, dout) = (c.n_points(), c.dim(), map.out_dim());
    let (nodes, weights) = gauss_legendre(REMAINDER_QUADRATURE_POINTS);
    let r_in = c.remainder();
    let jacobians: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut v = vec![0.0; dout];
            let mut jac = vec![0.0; dout * din];
            map.eval(c.value(i), &mut v, Some(&mut jac));
            jac
        })
        .collect();
    Ok(TwoParamGrid::from_fn(n, n + 1, dout, |xi, eta, out| {
        let j0 = &jacobians[eta % n];
        let (yx, ye) = (c.value(xi), c.value(eta));
        let dy: Vec<f64> = (0..din).map(|k| yx[k] - ye[k]).collect();
        let r = r_in.get(xi, eta);
        let mut avg = vec![0.0; dout * din];
        let mut point = vec![0.0; din];
        let mut v = vec![0.0; dout];
        let mut jac = vec![0.0; dout * din];
        for (x, wq) in nodes.iter().zip(&weights) {
            let rr = 0.5 * (x + 1.0);
            for k in 0..din {
                point[k] = ye[k] + rr * dy[k];
            }
            map.eval(&point, &mut v, Some(&mut jac));
            for (a, (jv, j0v)) in avg.iter_mut().zip(jac.iter().zip(j0)) {
                *a += 0.5 * wq * (jv - j0v);
            }
        }
        for o in 0..dout {
            out[o] = (0..din).map(|k| j0[o * din + k] * r[k] + avg[o * din + k] * dy[k]).sum();
        }
    }))
}

/// Fitted constant `K` in
/// `‖m(Y)‖ ≤ K ‖Dm‖_{C¹} ‖Y‖ (1 + ‖Y‖)(1 + |X|_ν)²`, seminorms on both sides.
pub fn regular_map_constant(map_c1_norm: f64, input: &ControlledCurve, output: &ControlledCurve) -> f64 {
    let (ni, no) = (input.controlled_norm(), output.controlled_norm());
    let holder_x = input.base().x().holder(
        input.base().nu(),
        HolderOptions::default().with_magnitude(crate::circle_algebra::Magnitude::Euclidean),
    );
    let y = ni.seminorm + ni.derivative_sup;
    let rhs = map_c1_norm * y * (1.0 + y) * (1.0 + holder_x).powi(2);
    if rhs > 0.0 {
        no.seminorm / rhs
    } else {
        0.0
    }
}

/// Affine map `x ↦ A x + b` on ℝ³.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub a: linalg::Mat3,
    pub b: linalg::Vec3,
}

impl SmoothMap for AffineMap {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>) {
        let y = linalg::add(linalg::mat_vec(&self.a, [x[0], x[1], x[2]]), self.b);
        value.copy_from_slice(&y);
        if let Some(j) = jacobian {
            j.copy_from_slice(&linalg::flatten(&self.a));
        }
    }
}

/// `x ↦ |x|²` on ℝ³.
#[derive(Debug, Clone, Copy)]
pub struct SquaredNorm;

impl SmoothMap for SquaredNorm {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>) {
        value[0] = x.iter().map(|v| v * v).sum();
        if let Some(j) = jacobian {
            for k in 0..3 {
                j[k] = 2.0 * x[k];
            }
        }
    }
}
