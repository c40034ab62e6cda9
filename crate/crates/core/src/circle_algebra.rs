//! Discrete calculus on the circle S¹ ≅ [0, 1).
//!
//! One-, two- and three-parameter grid functions, the coboundary operators
//! `δ₁g(t,s) = g(t) − g(s)` and `δ₂h(t,u,s) = h(t,s) − h(t,u) − h(u,s)`,
//! Hölder-type norms and the dyadic sewing map.
//!
//! Grids carry `n_intervals` (the spacing is `1 / n_intervals`) and a node
//! count `size`. A plain periodic grid has `size == n_intervals`; grids built
//! over a closed curve in the chart `[0, 1]` have `size == n_intervals + 1`,
//! the last node sitting at chart position 1 (the same point of S¹ as node 0).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{euclid, max_abs};

/// Chart-distance cutoff used for norms at the doubled and tripled scales.
pub const LOCAL_WINDOW: f64 = 0.25;

pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Uniform grid `ξ_i = i / N` on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleGrid {
    n: usize,
}

impl CircleGrid {
    pub const MAX_POINTS: usize = 1024;

    pub fn new(n: usize) -> Result<Self> {
        if !(8..=Self::MAX_POINTS).contains(&n) || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }
}

/// How distances between nodes enter the Hölder denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Circle,
    Chart,
}

/// Magnitude of a single (vector or tensor) entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Magnitude {
    MaxAbs,
    Euclidean,
}

impl Magnitude {
    #[inline]
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Magnitude::MaxAbs => max_abs(v),
            Magnitude::Euclidean => euclid(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderOptions {
    pub metric: Metric,
    pub magnitude: Magnitude,
    /// Only pairs whose chart distance is at most this value enter the sup.
    pub max_chart_distance: Option<f64>,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Circle,
            magnitude: Magnitude::MaxAbs,
            max_chart_distance: None,
        }
    }
}

impl HolderOptions {
    /// Circle metric restricted to chart-local pairs, for path-dependent
    /// two-parameter objects (areas, integral remainders).
    pub fn local() -> Self {
        Self {
            max_chart_distance: Some(LOCAL_WINDOW),
            ..Self::default()
        }
    }

    pub fn with_magnitude(mut self, magnitude: Magnitude) -> Self {
        self.magnitude = magnitude;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    /// Distance used in the denominator, or `None` if the pair is excluded.
    #[inline]
    fn distance(&self, a: f64, b: f64) -> Option<f64> {
        let chart = (a - b).abs();
        if let Some(w) = self.max_chart_distance {
            if chart > w + 1e-12 {
                return None;
            }
        }
        let d = match self.metric {
            Metric::Circle => circle_distance(a, b),
            Metric::Chart => chart,
        };
        (d > 1e-14).then_some(d)
    }
}

/// One-parameter function on grid nodes with `dim` components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n_intervals: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl GridFunction {
    pub fn new(n_intervals: usize, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        Self { n_intervals, dim, data }
    }

    pub fn from_fn(n_intervals: usize, size: usize, dim: usize, f: impl Fn(usize, &mut [f64])) -> Self {
        let mut data = vec![0.0; size * dim];
        for (i, chunk) in data.chunks_mut(dim).enumerate() {
            f(i, chunk);
        }
        Self { n_intervals, dim, data }
    }

    pub fn size(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 / self.n_intervals as f64
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Two-parameter function `f(ξ_i, ξ_j)`, stored row-major by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParamGrid {
    pub n_intervals: usize,
    pub size: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TwoParamGrid {
    pub fn zeros(n_intervals: usize, size: usize, dim: usize) -> Self {
        Self { n_intervals, size, dim, data: vec![0.0; size * size * dim] }
    }

    pub fn from_fn(
        n_intervals: usize,
        size: usize,
        dim: usize,
        f: impl Fn(usize, usize, &mut [f64]) + Sync,
    ) -> Self {
        let mut data = vec![0.0; size * size * dim];
        data.par_chunks_mut(size * dim).enumerate().for_each(|(i, row)| {
            for (j, entry) in row.chunks_mut(dim).enumerate() {
                f(i, j, entry);
            }
        });
        Self { n_intervals, size, dim, data }
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 / self.n_intervals as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i * self.size + j) * self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let k = self.index(i, j);
        &self.data[k..k + self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = self.index(i, j);
        &mut self.data[k..k + self.dim]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Largest entry magnitude on the diagonal.
    pub fn diagonal_defect(&self) -> f64 {
        (0..self.size).map(|i| max_abs(self.get(i, i))).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }
}

/// Three-parameter function `h(ξ_i, ξ_j, ξ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeParamGrid {
    pub n_intervals: usize,
    pub size: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl ThreeParamGrid {
    pub fn from_fn(
        n_intervals: usize,
        size: usize,
        dim: usize,
        f: impl Fn(usize, usize, usize, &mut [f64]) + Sync,
    ) -> Self {
        let mut data = vec![0.0; size * size * size * dim];
        data.par_chunks_mut(size * size * dim).enumerate().for_each(|(i, block)| {
            for (jk, entry) in block.chunks_mut(dim).enumerate() {
                f(i, jk / size, jk % size, entry);
            }
        });
        Self { n_intervals, size, dim, data }
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 / self.n_intervals as f64
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> &[f64] {
        let idx = ((i * self.size + j) * self.size + k) * self.dim;
        &self.data[idx..idx + self.dim]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }
}

pub fn delta1(g: &GridFunction) -> TwoParamGrid {
    let dim = g.dim;
    TwoParamGrid::from_fn(g.n_intervals, g.size(), dim, |i, j, out| {
        let (a, b) = (g.get(i), g.get(j));
        for c in 0..dim {
            out[c] = a[c] - b[c];
        }
    })
}

pub fn delta2(h: &TwoParamGrid) -> ThreeParamGrid {
    let dim = h.dim;
    ThreeParamGrid::from_fn(h.n_intervals, h.size, dim, |t, u, s, out| {
        let (ts, tu, us) = (h.get(t, s), h.get(t, u), h.get(u, s));
        for c in 0..dim {
            out[c] = ts[c] - tu[c] - us[c];
        }
    })
}

/// `sup |g(a) − g(b)| / d(a,b)^ν` over node pairs.
pub fn holder_norm_1(g: &GridFunction, nu: f64, opts: HolderOptions) -> f64 {
    let size = g.size();
    let mut scratch = vec![0.0; g.dim];
    let mut best = 0.0_f64;
    for i in 0..size {
        for j in 0..i {
            let Some(d) = opts.distance(g.position(i), g.position(j)) else { continue };
            for (c, s) in scratch.iter_mut().enumerate() {
                *s = g.get(i)[c] - g.get(j)[c];
            }
            best = best.max(opts.magnitude.of(&scratch) / d.powf(nu));
        }
    }
    best
}

/// `sup |f(a,b)| / d(a,b)^μ` over off-diagonal node pairs.
pub fn holder_norm_2(f: &TwoParamGrid, mu: f64, opts: HolderOptions) -> f64 {
    (0..f.size)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0_f64;
            for j in 0..f.size {
                if i == j {
                    continue;
                }
                let Some(d) = opts.distance(f.position(i), f.position(j)) else { continue };
                best = best.max(opts.magnitude.of(f.get(i, j)) / d.powf(mu));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Single-term three-parameter norm `sup |h(a,b,c)| / (d(a,b)^{μ/2} d(b,c)^{μ/2})`.
pub fn holder_norm_3(h: &ThreeParamGrid, mu: f64, opts: HolderOptions) -> f64 {
    let rho = 0.5 * mu;
    (0..h.size)
        .into_par_iter()
        .map(|a| {
            let mut best = 0.0_f64;
            for b in 0..h.size {
                let Some(dab) = opts.distance(h.position(a), h.position(b)) else { continue };
                for c in 0..h.size {
                    let Some(dbc) = opts.distance(h.position(b), h.position(c)) else { continue };
                    let v = opts.magnitude.of(h.get(a, b, c));
                    best = best.max(v / (dab.powf(rho) * dbc.powf(rho)));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest deviation of `h` from the δ₂-image, measured against the
/// primitive `B(t,s) = −h(t,s,ξ_0)`.
///
/// A three-parameter function is δ₂-exact iff `h = δ₂B` for this `B`.
pub fn exactness_defect(h: &ThreeParamGrid) -> f64 {
    let dim = h.dim;
    (0..h.size)
        .into_par_iter()
        .map(|t| {
            let mut worst = 0.0_f64;
            for u in 0..h.size {
                for s in 0..h.size {
                    let (hts, htu, hus, huts) =
                        (h.get(t, s, 0), h.get(t, u, 0), h.get(u, s, 0), h.get(t, u, s));
                    for c in 0..dim {
                        // δ₂B(t,u,s) = −h(t,s,0) + h(t,u,0) + h(u,s,0)
                        let db = -hts[c] + htu[c] + hus[c];
                        worst = worst.max((huts[c] - db).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Relative tolerance for the exactness precondition of [`sewing`].
pub const EXACTNESS_TOLERANCE: f64 = 1e-10;

/// Sewing map: the unique `F` with `δ₂F = h` vanishing on adjacent chart
/// pairs `(ξ_{i+1}, ξ_i)`.
///
/// For `s < t` the value is built by dyadic bisection of the chart interval,
/// `F(t,s) = h(t,m,s) + F(t,m) + F(m,s)`, filled in order of increasing
/// interval length. Reversed pairs follow from `δ₂F(t,s,t) = h(t,s,t)`.
pub fn sewing(h: &ThreeParamGrid, mu: f64) -> Result<TwoParamGrid> {
    if mu <= 1.0 {
        return Err(Error::ExponentOutOfRange(mu));
    }
    let defect = exactness_defect(h);
    let tolerance = EXACTNESS_TOLERANCE * h.max_abs().max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NotExact { defect, tolerance });
    }
    let (size, dim) = (h.size, h.dim);
    let mut out = TwoParamGrid::zeros(h.n_intervals, size, dim);
    let mut entry = vec![0.0; dim];
    for len in 2..size {
        for s in 0..size - len {
            let t = s + len;
            let m = s + len / 2;
            for c in 0..dim {
                entry[c] = h.get(t, m, s)[c] + out.get(t, m)[c] + out.get(m, s)[c];
            }
            out.get_mut(t, s).copy_from_slice(&entry);
        }
    }
    for t in 0..size {
        for s in t + 1..size {
            for c in 0..dim {
                entry[c] = -out.get(s, t)[c] - h.get(t, s, t)[c];
            }
            out.get_mut(t, s).copy_from_slice(&entry);
        }
    }
    Ok(out)
}

/// The constant `(2^μ − 2)^{-1}` in the sewing bound.
pub fn sewing_constant(mu: f64) -> f64 {
    1.0 / (2f64.powf(mu) - 2.0)
}
