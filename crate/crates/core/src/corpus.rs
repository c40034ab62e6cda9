//! Reference inputs shared by the validation suite and the tests: the test
//! curve corpus and random cochain data.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::circle_algebra::{delta2, GridFunction, ThreeParamGrid, TwoParamGrid};
use crate::error::Result;
use crate::rough_path::{circle, lift_piecewise_linear, sample_brownian_bridge, trefoil, ControlledCurve, GridCurve, RoughPath};

/// Exponent used for smooth corpus curves.
pub const SMOOTH_NU: f64 = 0.9;
/// Exponent used for Brownian-bridge corpus curves.
pub const ROUGH_NU: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct NamedCurve {
    pub name: String,
    pub samples: GridCurve,
    pub nu: f64,
}

impl NamedCurve {
    pub fn lift(&self) -> Result<Arc<RoughPath>> {
        lift_piecewise_linear(&self.samples, self.nu).map(Arc::new)
    }

    /// The curve controlled by its own lift (`Y′ = I`).
    pub fn controlled(&self) -> Result<ControlledCurve> {
        Ok(ControlledCurve::identity(self.lift()?))
    }
}

/// Unit circle, trefoil with `a = 0.5`, and Brownian bridges with the
/// given seeds, all on `n` nodes.
pub fn test_curves(n: usize, bridge_seeds: impl IntoIterator<Item = u64>) -> Result<Vec<NamedCurve>> {
    let mut out = vec![
        NamedCurve { name: "circle".into(), samples: circle(n, 1.0)?, nu: SMOOTH_NU },
        NamedCurve { name: "trefoil".into(), samples: trefoil(n, 0.5)?, nu: SMOOTH_NU },
    ];
    for seed in bridge_seeds {
        out.push(NamedCurve {
            name: format!("bridge-{seed}"),
            samples: sample_brownian_bridge(n, seed, [0.0; 3], 1.0)?,
            nu: ROUGH_NU,
        });
    }
    Ok(out)
}

/// Grid function on `n + 1` chart nodes with closed values and i.i.d.
/// uniform entries.
pub fn random_grid_function(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let base: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    GridFunction::from_fn(n, n + 1, dim, |i, out| {
        let k = i % n;
        out.copy_from_slice(&base[k * dim..(k + 1) * dim]);
    })
}

fn trig(coeffs: &[(f64, f64)], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let w = 2.0 * PI * (k + 1) as f64 * x;
            a * w.cos() + b * w.sin()
        })
        .sum()
}

/// `δ₂`-exact input of one of two shapes, chosen at random:
/// `(f_u − f_s)(g_t − g_u)` for random trigonometric `f, g`, or `δ₂A` for a
/// random `A` with `|A(t,s)| ≤ |t − s|^μ` on the chart.
pub fn random_exact(n: usize, mu: f64, rng: &mut ChaCha8Rng) -> ThreeParamGrid {
    let size = n + 1;
    if rng.random_bool(0.5) {
        let cf: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let cg: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let f: Vec<f64> = (0..size).map(|i| trig(&cf, i as f64 / n as f64)).collect();
        let g: Vec<f64> = (0..size).map(|i| trig(&cg, i as f64 / n as f64)).collect();
        ThreeParamGrid::from_fn(n, size, 1, |t, u, s, out| out[0] = (f[u] - f[s]) * (g[t] - g[u]))
    } else {
        let entries: Vec<f64> = (0..size * size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = TwoParamGrid::from_fn(n, size, 1, |t, s, out| {
            let d = (t as f64 - s as f64).abs() / n as f64;
            out[0] = entries[t * size + s] * d.powf(mu);
        });
        delta2(&a)
    }
}
