//! Closed curves, their piecewise-linear rough-path lifts, Brownian-bridge
//! samples and paths controlled by a fixed rough path.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle_algebra::{
    holder_norm_1, holder_norm_2, CircleGrid, GridFunction, HolderOptions, Magnitude, TwoParamGrid,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// A closed curve sampled at `ξ_i = i / N`; node `N` is node `0` again.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCurve {
    points: Vec<Vec3>,
}

impl GridCurve {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        CircleGrid::new(points.len())?;
        Ok(Self { points })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Node value with wrap-around, valid for any index.
    #[inline]
    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i % self.points.len()]
    }

    #[inline]
    pub fn increment(&self, i: usize) -> Vec3 {
        linalg::sub(self.point(i + 1), self.point(i))
    }

    /// Values on the `N + 1` chart nodes `0, 1/N, …, 1`.
    pub fn closed_extension(&self) -> GridFunction {
        let n = self.n_points();
        GridFunction::from_fn(n, n + 1, 3, |i, out| out.copy_from_slice(&self.point(i)))
    }

    pub fn sup_norm(&self) -> f64 {
        self.points.iter().map(|p| linalg::norm(*p)).fold(0.0, f64::max)
    }

    pub fn holder(&self, nu: f64, opts: HolderOptions) -> f64 {
        holder_norm_1(&self.closed_extension(), nu, opts)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[..i] {
                d = d.max(linalg::norm(linalg::sub(*a, *b)));
            }
        }
        d
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { points: self.points.iter().map(|p| f(*p)).collect() }
    }

    /// Piecewise-linear interpolation onto a finer grid of `n` points.
    pub fn refine_linear(&self, n: usize) -> Result<Self> {
        let m = self.n_points();
        if !n.is_multiple_of(m) {
            return Err(Error::GridMismatch { expected: m, found: n });
        }
        let k = n / m;
        Self::new(
            (0..n)
                .map(|i| {
                    let (seg, frac) = (i / k, (i % k) as f64 / k as f64);
                    linalg::add(self.point(seg), linalg::scale(self.increment(seg), frac))
                })
                .collect(),
        )
    }
}

/// Planar circle of the given radius in the `z = 0` plane.
pub fn circle(n: usize, radius: f64) -> Result<GridCurve> {
    GridCurve::from_fn(n, |xi| {
        let th = 2.0 * PI * xi;
        [radius * th.cos(), radius * th.sin(), 0.0]
    })
}

/// Trefoil knot `((2 + cos 4πξ) cos 2πξ, (2 + cos 4πξ) sin 2πξ, sin 4πξ)·a`.
pub fn trefoil(n: usize, a: f64) -> Result<GridCurve> {
    GridCurve::from_fn(n, |xi| {
        let (t1, t2) = (2.0 * PI * xi, 4.0 * PI * xi);
        let r = 2.0 + t2.cos();
        [a * r * t1.cos(), a * r * t1.sin(), a * t2.sin()]
    })
}

/// Three-dimensional Brownian bridge pinned at `x0` for `ξ = 0` and `ξ = 1`.
///
/// Nodes are filled by dyadic midpoint refinement: the midpoint of an
/// interval of length `L` is the average of its endpoints plus an independent
/// `N(0, L/4)` draw per coordinate, which reproduces the bridge covariance
/// `min(s,t) − st` exactly on the grid.
pub fn sample_brownian_bridge(n: usize, seed: u64, x0: Vec3, scale: f64) -> Result<GridCurve> {
    CircleGrid::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![[0.0; 3]; n + 1];
    values[0] = x0;
    values[n] = x0;
    let mut step = n / 2;
    while step >= 1 {
        let sd = scale * (2.0 * step as f64 / n as f64 / 4.0).sqrt();
        let mut mid = step;
        while mid < n {
            let (l, r) = (values[mid - step], values[mid + step]);
            for c in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                values[mid][c] = 0.5 * (l[c] + r[c]) + sd * z;
            }
            mid += 2 * step;
        }
        step /= 2;
    }
    values.pop();
    GridCurve::new(values)
}

/// Lévy-area lift of a closed curve: the first level `X` together with the
/// second level `𝕏²(t,s) = ∫_s^t (X_ρ − X_s) ⊗ dX_ρ` on all chart node pairs.
///
/// The area tensor is stored as `area[a][b] = ∫ (X^a − X^a_s) dX^b` and
/// satisfies `𝕏²(t,s) − 𝕏²(t,u) − 𝕏²(u,s) = (X_u − X_s) ⊗ (X_t − X_u)`.
#[derive(Debug, Clone)]
pub struct RoughPath {
    nu: f64,
    x: GridCurve,
    area: TwoParamGrid,
    holder_x: f64,
    holder_area: f64,
}

pub fn validate_nu(nu: f64) -> Result<()> {
    if nu > 1.0 / 3.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentTooLow { nu, requirement: "nu must lie in (1/3, 1)" })
    }
}

/// Piecewise-linear geometric lift. Each segment carries `½ ΔX ⊗ ΔX`; longer
/// chart intervals are assembled with the Chen relation.
pub fn lift_piecewise_linear(samples: &GridCurve, nu: f64) -> Result<RoughPath> {
    validate_nu(nu)?;
    let n = samples.n_points();
    let size = n + 1;
    let mut area = TwoParamGrid::zeros(n, size, 9);
    // forward chart intervals, one base point per row
    area.data.par_chunks_mut(size * 9).enumerate().for_each(|(s, row)| {
        let xs = samples.point(s);
        let mut acc = [[0.0; 3]; 3];
        for t in s + 1..size {
            let dx = samples.increment(t - 1);
            let lead = linalg::sub(samples.point(t - 1), xs);
            for a in 0..3 {
                for b in 0..3 {
                    acc[a][b] += 0.5 * dx[a] * dx[b] + lead[a] * dx[b];
                }
            }
            row[t * 9..t * 9 + 9].copy_from_slice(&linalg::flatten(&acc));
        }
    });
    // Row `s` now holds 𝕏²(t,s) for t > s in slot (s,t). Move it to (t,s) and
    // fill (s,t) with 𝕏²(s,t) = −𝕏²(t,s) + (X_t − X_s) ⊗ (X_t − X_s).
    for s in 0..size {
        for t in s + 1..size {
            let fwd: [f64; 9] = area.get(s, t).try_into().expect("dim 9");
            let d = linalg::sub(samples.point(t), samples.point(s));
            area.get_mut(t, s).copy_from_slice(&fwd);
            let back = area.get_mut(s, t);
            for a in 0..3 {
                for b in 0..3 {
                    back[3 * a + b] = d[a] * d[b] - fwd[3 * a + b];
                }
            }
        }
    }
    let holder_x = samples.holder(nu, HolderOptions::default());
    let holder_area = holder_norm_2(&area, 2.0 * nu, HolderOptions::local());
    Ok(RoughPath { nu, x: samples.clone(), area, holder_x, holder_area })
}

impl RoughPath {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn x(&self) -> &GridCurve {
        &self.x
    }

    pub fn n_points(&self) -> usize {
        self.x.n_points()
    }

    pub fn area(&self) -> &TwoParamGrid {
        &self.area
    }

    pub fn area_at(&self, t: usize, s: usize) -> Mat3 {
        linalg::unflatten(self.area.get(t, s))
    }

    /// Area of the single segment from node `i` to node `i + 1`.
    pub fn segment_area(&self, i: usize) -> Mat3 {
        self.area_at(i + 1, i)
    }

    /// Cached `|X|_{C^ν}`.
    pub fn holder_x(&self) -> f64 {
        self.holder_x
    }

    /// Cached `|𝕏²|_{C₂^{2ν}}` over chart-local pairs.
    pub fn holder_area(&self) -> f64 {
        self.holder_area
    }

    /// Antisymmetric part of the full-loop area, `½(𝕏²^{ab} − 𝕏²^{ba})`.
    pub fn levy_area(&self, a: usize, b: usize) -> f64 {
        let n = self.n_points();
        let m = self.area_at(n, 0);
        0.5 * (m[a][b] - m[b][a])
    }

    /// Squared diameter of the curve; the natural size of area entries.
    pub fn scale(&self) -> f64 {
        self.x.diameter().powi(2)
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        match (0..self.n_points()).find(|&i| linalg::norm(self.x.increment(i)) == 0.0) {
            Some(i) => Err(Error::DegenerateCurve(i)),
            None => Ok(()),
        }
    }

    /// Copy with one area entry shifted by `eps` in every component, for
    /// fault-injection checks.
    pub fn with_area_perturbation(&self, t: usize, s: usize, eps: f64) -> Self {
        let mut out = self.clone();
        out.area.get_mut(t, s).iter_mut().for_each(|v| *v += eps);
        out
    }

    /// Same path viewed with a smaller Hölder exponent.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        validate_nu(nu)?;
        Ok(Self {
            nu,
            x: self.x.clone(),
            area: self.area.clone(),
            holder_x: self.x.holder(nu, HolderOptions::default()),
            holder_area: holder_norm_2(&self.area, 2.0 * nu, HolderOptions::local()),
        })
    }
}

/// Number of node triples above which [`chen_defect`] samples instead of
/// enumerating.
const CHEN_FULL_LIMIT: usize = 257;
const CHEN_SAMPLES: usize = 200_000;

/// Largest entry of `δ₂𝕏²(t,u,s) − (X_u − X_s) ⊗ (X_t − X_u)` over chart
/// node triples (all triples up to 257 nodes, a fixed random sample beyond).
pub fn chen_defect(rp: &RoughPath) -> f64 {
    let size = rp.area.size;
    let x = &rp.x;
    let defect = |t: usize, u: usize, s: usize| -> f64 {
        let (ts, tu, us) = (rp.area.get(t, s), rp.area.get(t, u), rp.area.get(u, s));
        let left = linalg::sub(x.point(u), x.point(s));
        let right = linalg::sub(x.point(t), x.point(u));
        let mut worst = 0.0_f64;
        for a in 0..3 {
            for b in 0..3 {
                let k = 3 * a + b;
                worst = worst.max((ts[k] - tu[k] - us[k] - left[a] * right[b]).abs());
            }
        }
        worst
    };
    if size <= CHEN_FULL_LIMIT {
        (0..size)
            .into_par_iter()
            .map(|t| {
                let mut worst = 0.0_f64;
                for u in 0..size {
                    for s in 0..size {
                        worst = worst.max(defect(t, u, s));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    } else {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..CHEN_SAMPLES)
            .map(|_| defect(rng.random_range(0..size), rng.random_range(0..size), rng.random_range(0..size)))
            .fold(0.0, f64::max)
    }
}

/// A path `Y` weakly controlled by a rough path `X`: values `Y(ξ_i)` with
/// `dim` components and Gubinelli derivative `Y′(ξ_i) ∈ L(ℝ³, ℝ^dim)`.
///
/// The remainder `R(ξ,η) = Y(ξ) − Y(η) − Y′(η)(X(ξ) − X(η))` is never
/// stored; it is recomputed from `(Y, Y′, X)` on demand.
#[derive(Debug, Clone)]
pub struct ControlledCurve {
    dim: usize,
    values: Vec<f64>,
    derivative: Vec<f64>,
    base: Arc<RoughPath>,
}

/// Build a controlled curve from flat node values (`N × dim`) and flat
/// derivatives (`N × dim × 3`, row-major per node).
pub fn make_controlled(
    dim: usize,
    values: Vec<f64>,
    derivative: Vec<f64>,
    base: Arc<RoughPath>,
) -> Result<ControlledCurve> {
    let n = base.n_points();
    if dim == 0 || values.len() != n * dim {
        return Err(Error::GridMismatch { expected: n * dim, found: values.len() });
    }
    if derivative.len() != n * dim * 3 {
        return Err(Error::GridMismatch { expected: n * dim * 3, found: derivative.len() });
    }
    Ok(ControlledCurve { dim, values, derivative, base })
}

impl ControlledCurve {
    /// A curve in ℝ³ with a 3×3 derivative at every node.
    pub fn from_curve(curve: &GridCurve, derivative: &[Mat3], base: Arc<RoughPath>) -> Result<Self> {
        if curve.n_points() != base.n_points() {
            return Err(Error::GridMismatch { expected: base.n_points(), found: curve.n_points() });
        }
        let values = curve.points().iter().flatten().copied().collect();
        let derivative = derivative.iter().flat_map(linalg::flatten).collect();
        make_controlled(3, values, derivative, base)
    }

    /// The base path controlled by itself: `Y = X`, `Y′ = id`, `R ≡ 0`.
    pub fn identity(base: Arc<RoughPath>) -> Self {
        let n = base.n_points();
        let curve = base.x().clone();
        Self::from_curve(&curve, &vec![linalg::IDENTITY3; n], base).expect("sizes agree")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.base.n_points()
    }

    pub fn base(&self) -> &Arc<RoughPath> {
        &self.base
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        let i = i % self.n_points();
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major `dim × 3` derivative at node `i`.
    #[inline]
    pub fn derivative(&self, i: usize) -> &[f64] {
        let i = i % self.n_points();
        &self.derivative[i * self.dim * 3..(i + 1) * self.dim * 3]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivative
    }

    /// View as a curve in ℝ³ when `dim == 3`.
    pub fn curve(&self) -> Option<GridCurve> {
        (self.dim == 3).then(|| {
            GridCurve { points: self.values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect() }
        })
    }

    pub fn derivative_matrix(&self, i: usize) -> Mat3 {
        assert_eq!(self.dim, 3);
        linalg::unflatten(self.derivative(i))
    }

    /// Remainder on all chart node pairs (size `N + 1`).
    pub fn remainder(&self) -> TwoParamGrid {
        let n = self.n_points();
        let dim = self.dim;
        let x = self.base.x();
        TwoParamGrid::from_fn(n, n + 1, dim, |i, j, out| {
            let dx = linalg::sub(x.point(i), x.point(j));
            let (yi, yj, dj) = (self.value(i), self.value(j), self.derivative(j));
            for c in 0..dim {
                let lin: f64 = (0..3).map(|a| dj[3 * c + a] * dx[a]).sum();
                out[c] = yi[c] - yj[c] - lin;
            }
        })
    }

    fn derivative_function(&self) -> GridFunction {
        let n = self.n_points();
        let w = self.dim * 3;
        GridFunction::from_fn(n, n + 1, w, |i, out| out.copy_from_slice(self.derivative(i)))
    }

    fn value_function(&self) -> GridFunction {
        let n = self.n_points();
        GridFunction::from_fn(n, n + 1, self.dim, |i, out| out.copy_from_slice(self.value(i)))
    }

    /// Controlled-path norms, with Euclidean/Frobenius entry magnitudes so
    /// that `|Y′ ΔX| ≤ |Y′| |ΔX|` holds entrywise.
    pub fn controlled_norm(&self) -> ControlledNorm {
        let nu = self.base.nu();
        let opts = HolderOptions::default().with_magnitude(Magnitude::Euclidean);
        let n = self.n_points();
        let derivative_holder = holder_norm_1(&self.derivative_function(), nu, opts);
        let derivative_sup = (0..n).map(|i| linalg::euclid(self.derivative(i))).fold(0.0, f64::max);
        let remainder_holder = holder_norm_2(&self.remainder(), 2.0 * nu, opts);
        let sup_value = (0..n).map(|i| linalg::euclid(self.value(i))).fold(0.0, f64::max);
        let seminorm = derivative_holder + remainder_holder;
        let full_norm = seminorm + sup_value;
        let holder_value = holder_norm_1(&self.value_function(), nu, opts);
        let holder_x = self.base.x().holder(nu, opts);
        ControlledNorm {
            seminorm,
            full_norm,
            derivative_holder,
            derivative_sup,
            remainder_holder,
            sup_value,
            holder_value,
            holder_bound: (full_norm + derivative_sup) * (1.0 + holder_x),
        }
    }
}

/// Norms of a controlled curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlledNorm {
    /// `[Y′]_ν + ‖R‖_{2ν}`
    pub seminorm: f64,
    /// `seminorm + sup|Y|`
    pub full_norm: f64,
    pub derivative_holder: f64,
    pub derivative_sup: f64,
    pub remainder_holder: f64,
    pub sup_value: f64,
    /// `|Y|_{C^ν}`
    pub holder_value: f64,
    /// `(full_norm + sup|Y′|)(1 + |X|_{C^ν})`, an upper bound for `holder_value`.
    pub holder_bound: f64,
}

/// Header of a curve snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub nu: f64,
    pub seed: Option<u64>,
    pub scale: f64,
    pub t: Option<f64>,
}

const SNAPSHOT_MAGIC: &str = "# roughfil curve snapshot v1";

/// Line-oriented snapshot: magic line, `# key=value` header line, column
/// line, then one `index xi x y z` record per node in `{:.17e}` format.
pub fn write_snapshot(mut w: impl Write, header: &SnapshotHeader, curve: &GridCurve) -> Result<()> {
    writeln!(w, "{SNAPSHOT_MAGIC}")?;
    let seed = header.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    let t = header.t.map_or_else(|| "none".to_string(), |t| format!("{t:.17e}"));
    writeln!(w, "# N={} nu={:.17e} seed={} scale={:.17e} t={}", header.n, header.nu, seed, header.scale, t)?;
    writeln!(w, "# index xi x y z")?;
    let n = curve.n_points();
    for (i, p) in curve.points().iter().enumerate() {
        writeln!(w, "{} {:.17e} {:.17e} {:.17e} {:.17e}", i, i as f64 / n as f64, p[0], p[1], p[2])?;
    }
    Ok(())
}

pub fn read_snapshot(r: impl BufRead) -> Result<(SnapshotHeader, GridCurve)> {
    let bad = |m: &str| Error::Snapshot(m.to_string());
    let mut lines = r.lines();
    let magic = lines.next().ok_or_else(|| bad("empty file"))??;
    if magic.trim() != SNAPSHOT_MAGIC {
        return Err(bad("missing magic line"));
    }
    let head = lines.next().ok_or_else(|| bad("missing header"))??;
    let mut header = SnapshotHeader { n: 0, nu: 0.0, seed: None, scale: 0.0, t: None };
    for kv in head.trim_start_matches('#').split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad("header entry without '='"))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad("bad number in header"));
        match k {
            "N" => header.n = v.parse().map_err(|_| bad("bad N"))?,
            "nu" => header.nu = num(v)?,
            "seed" if v == "none" => header.seed = None,
            "seed" => header.seed = Some(v.parse().map_err(|_| bad("bad seed"))?),
            "scale" => header.scale = num(v)?,
            "t" if v == "none" => header.t = None,
            "t" => header.t = Some(num(v)?),
            _ => return Err(bad("unknown header key")),
        }
    }
    let mut points = Vec::with_capacity(header.n);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad("record must have 5 fields"));
        }
        let idx: usize = fields[0].parse().map_err(|_| bad("bad index"))?;
        if idx != points.len() {
            return Err(bad("records out of order"));
        }
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = fields[2 + c].parse().map_err(|_| bad("bad coordinate"))?;
        }
        points.push(p);
    }
    if points.len() != header.n {
        return Err(bad("record count does not match N"));
    }
    Ok((header, GridCurve::new(points)?))
}
