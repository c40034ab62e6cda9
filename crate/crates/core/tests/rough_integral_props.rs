use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use roughfil_core::kernel::{Kernel, KernelSpec};
use roughfil_core::rough_integral::*;
use roughfil_core::rough_path::*;

fn lifted(curve: GridCurve, nu: f64) -> Arc<RoughPath> {
    Arc::new(lift_piecewise_linear(&curve, nu).unwrap())
}

fn bridge(n: usize, seed: u64) -> Arc<RoughPath> {
    lifted(sample_brownian_bridge(n, seed, [0.0; 3], 1.0).unwrap(), 0.4)
}

/// `x ↦ φ(x − c)` for a Rosenhead kernel.
struct Shifted {
    kernel: KernelSpec,
    centre: [f64; 3],
}

impl SmoothMap for Shifted {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn order(&self) -> usize {
        self.kernel.max_order()
    }
    fn eval(&self, x: &[f64], value: &mut [f64], jacobian: Option<&mut [f64]>) {
        let z = [x[0] - self.centre[0], x[1] - self.centre[1], x[2] - self.centre[2]];
        let d = self.kernel.derivatives(z, 1).unwrap();
        value[0] = d.value;
        if let Some(j) = jacobian {
            j.copy_from_slice(&d.grad);
        }
    }
}

/// `x ↦ (x₁x₂, x₃² − x₁, x₂x₃)`.
struct Quadratic;

impl SmoothMap for Quadratic {
    fn in_dim(&self) -> usize {
        3
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, x: &[f64], v: &mut [f64], j: Option<&mut [f64]>) {
        v.copy_from_slice(&[x[0] * x[1], x[2] * x[2] - x[0], x[1] * x[2]]);
        if let Some(j) = j {
            j.copy_from_slice(&[x[1], x[0], 0.0, -1.0, 0.0, 2.0 * x[2], 0.0, x[2], x[1]]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integral_is_linear_in_the_integrand(seed in any::<u64>(), c in -3.0..3.0f64) {
        let base = bridge(32, seed);
        let x = ControlledCurve::identity(base.clone());
        let w1 = compose_smooth(&Quadratic, &x).unwrap();
        let w2 = compose_smooth(&SquaredNorm, &x).unwrap();
        let w2 = compose_smooth(&AffineMapScalar, &w2).unwrap();
        let sum = make_controlled(
            3,
            w1.values().iter().zip(w2.values()).map(|(a, b)| a + c * b).collect(),
            w1.derivatives().iter().zip(w2.derivatives()).map(|(a, b)| a + c * b).collect(),
            base,
        )
        .unwrap();
        let (i1, i2, is) = (
            rough_integral_total(&w1, &x, Pairing::Dot).unwrap()[0],
            rough_integral_total(&w2, &x, Pairing::Dot).unwrap()[0],
            rough_integral_total(&sum, &x, Pairing::Dot).unwrap()[0],
        );
        prop_assert!((i1 + c * i2 - is).abs() <= 1e-11 * (1.0 + is.abs()));
    }

    #[test]
    fn quadratic_remainder_formula_matches_definition(seed in any::<u64>()) {
        let y = ControlledCurve::identity(bridge(64, seed));
        let def = compose_smooth(&Quadratic, &y).unwrap().remainder();
        let formula = remainder_by_expansion(&Quadratic, &y).unwrap();
        prop_assert!(formula.max_abs_diff(&def) <= 1e-9 * def.max_abs().max(1.0));
    }
}

/// `s ↦ (s, 2s, −s)`, lifting a scalar to ℝ³.
struct AffineMapScalar;

impl SmoothMap for AffineMapScalar {
    fn in_dim(&self) -> usize {
        1
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn order(&self) -> usize {
        usize::MAX
    }
    fn eval(&self, x: &[f64], v: &mut [f64], j: Option<&mut [f64]>) {
        v.copy_from_slice(&[x[0], 2.0 * x[0], -x[0]]);
        if let Some(j) = j {
            j.copy_from_slice(&[1.0, 2.0, -1.0]);
        }
    }
}

fn cos_dsin(n: usize) -> f64 {
    let base = lifted(circle(n, 1.0).unwrap(), 0.9);
    let x = ControlledCurve::identity(base.clone());
    let cosine = make_controlled(1, x.values().chunks(3).map(|p| p[0]).collect(), x.derivatives().chunks(9).flat_map(|d| d[0..3].to_vec()).collect(), base.clone()).unwrap();
    let sine = make_controlled(1, x.values().chunks(3).map(|p| p[1]).collect(), x.derivatives().chunks(9).flat_map(|d| d[3..6].to_vec()).collect(), base).unwrap();
    rough_integral_total(&cosine, &sine, Pairing::Dot).unwrap()[0]
}

#[test]
fn cosine_against_sine_gives_pi() {
    assert!((cos_dsin(512) - PI).abs() <= 1e-4, "{}", cos_dsin(512));
}

#[test]
fn circle_integral_converges_at_least_quadratically() {
    let errs: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| (cos_dsin(n) - PI).abs()).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.5, "{errs:?}");
    }
}

#[test]
fn q_norm_is_stable_under_refinement() {
    let q = |n: usize| {
        let base = lifted(trefoil(n, 0.5).unwrap(), 0.9);
        let x = ControlledCurve::identity(base);
        let w = compose_smooth(&Quadratic, &x).unwrap();
        rough_integral(&w, &x, Pairing::Dot).unwrap().q_norm
    };
    let (a, b) = (q(64), q(128));
    assert!(a.is_finite() && b.is_finite() && b <= 2.0 * a && a <= 2.0 * b, "{a} {b}");
}

#[test]
fn kernel_remainder_formula_matches_definition() {
    let map = Shifted { kernel: KernelSpec::rosenhead(1.0, 1.0).unwrap(), centre: [0.2, -0.1, 0.3] };
    let curves = [lifted(circle(128, 1.0).unwrap(), 0.9), bridge(128, 3), bridge(128, 4)];
    for base in curves {
        let y = ControlledCurve::identity(base);
        let def = compose_smooth(&map, &y).unwrap().remainder();
        let formula = remainder_by_expansion(&map, &y).unwrap();
        let diff = formula.max_abs_diff(&def);
        assert!(diff <= 1e-6 * def.max_abs().max(1.0), "diff {diff:.2e}");
    }
}

#[test]
fn young_sum_agrees_with_rough_sum_in_smooth_mode() {
    let base = lifted(trefoil(256, 0.5).unwrap(), 0.9);
    let x = ControlledCurve::identity(base);
    let w = compose_smooth(&Quadratic, &x).unwrap();
    let r = rough_integral_total(&w, &x, Pairing::Dot).unwrap()[0];
    let y = young_integral(&w, &x, Pairing::Dot).unwrap()[0];
    assert!((r - y).abs() <= 1e-3 * r.abs().max(1e-3), "{r} {y}");
}
