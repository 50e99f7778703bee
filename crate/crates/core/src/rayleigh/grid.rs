//! Test functions and conformal factors sampled on a tensor grid over
//! `T² × [t0, tN]`, for metrics `h(x, t)² (g_Σ + dt²)` whose factor depends
//! on the cross-section variable.
//!
//! Samples are stored with `x1` varying fastest, then `x2`, then `t`.
//! Cross-section derivatives are spectral; in `t` functions and the weight
//! `h^{n-1}` are piecewise linear and integrated exactly. The torus
//! directions use the rectangle rule, which is exact for trigonometric
//! polynomials below the Nyquist limit.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{pencil_eigenvalues, RayleighBound};
use crate::error::{Error, Result};
use crate::profile::smoothstep;

pub type FieldFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A scalar field, either analytic (resampled under refinement) or given as
/// samples on one particular grid.
#[derive(Clone)]
pub enum Field {
    Function(FieldFn),
    Samples(Arc<Vec<f64>>),
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field::Function(_) => f.write_str("Field::Function"),
            Field::Samples(v) => write!(f, "Field::Samples({} values)", v.len()),
        }
    }
}

impl Field {
    pub fn function(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Field {
        Field::Function(Arc::new(f))
    }

    fn slice(&self, grid: &TorusGrid, it: usize) -> Vec<f64> {
        let [n1, n2] = grid.nx;
        match self {
            Field::Function(f) => {
                let t = grid.t[it];
                let mut out = Vec::with_capacity(n1 * n2);
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        let (x1, x2) = grid.x(i1, i2);
                        out.push(f(x1, x2, t));
                    }
                }
                out
            }
            Field::Samples(v) => v[it * n1 * n2..(it + 1) * n1 * n2].to_vec(),
        }
    }

    /// Samples on `grid`, in storage order.
    pub fn sample(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.t.len()).flat_map(|it| self.slice(grid, it)).collect()
    }

    /// Read samples from a file: little-endian `f64` for a `.bin` extension,
    /// otherwise text with values separated by commas, whitespace or
    /// newlines (`#` starts a comment).
    pub fn load(path: &Path, grid: &TorusGrid) -> Result<Field> {
        let values: Vec<f64> = if path.extension().is_some_and(|e| e == "bin") {
            let bytes = std::fs::read(path)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::config(
                    path.display().to_string(),
                    "binary grid files hold little-endian f64 values",
                ));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        } else {
            let text = std::fs::read_to_string(path)?;
            let mut out = Vec::new();
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("");
                for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
                    out.push(tok.parse::<f64>().map_err(|e| {
                        Error::config(format!("{}:{}", path.display(), no + 1), e.to_string())
                    })?);
                }
            }
            out
        };
        if values.len() != grid.len() {
            return Err(Error::config(
                path.display().to_string(),
                format!("expected {} samples for the grid, found {}", grid.len(), values.len()),
            ));
        }
        Ok(Field::Samples(Arc::new(values)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub periods: [f64; 2],
    pub nx: [usize; 2],
    /// Increasing `t` nodes.
    pub t: Vec<f64>,
}

impl TorusGrid {
    pub fn new(periods: [f64; 2], nx: [usize; 2], t: Vec<f64>) -> Result<TorusGrid> {
        if periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::config("grid.periods", "periods must be positive"));
        }
        if nx.iter().any(|&n| n < 4 || n % 2 != 0) {
            return Err(Error::config("grid.nx", "at least 4 points per direction, even count"));
        }
        if t.len() < 2 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("grid.t", "t nodes must increase"));
        }
        Ok(TorusGrid { periods, nx, t })
    }

    pub fn len(&self) -> usize {
        self.nx[0] * self.nx[1] * self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i1: usize, i2: usize, it: usize) -> usize {
        i1 + self.nx[0] * (i2 + self.nx[1] * it)
    }

    pub fn x(&self, i1: usize, i2: usize) -> (f64, f64) {
        (
            self.periods[0] * i1 as f64 / self.nx[0] as f64,
            self.periods[1] * i2 as f64 / self.nx[1] as f64,
        )
    }

    fn cell_area(&self) -> f64 {
        self.periods[0] * self.periods[1] / (self.nx[0] * self.nx[1]) as f64
    }

    /// Twice the points per torus direction and every `t` element bisected.
    pub fn refined(&self) -> TorusGrid {
        let mut t = Vec::with_capacity(2 * self.t.len() - 1);
        for w in self.t.windows(2) {
            t.push(w[0]);
            t.push(0.5 * (w[0] + w[1]));
        }
        t.push(self.t[self.t.len() - 1]);
        TorusGrid {
            periods: self.periods,
            nx: [2 * self.nx[0], 2 * self.nx[1]],
            t,
        }
    }

    /// `t` nodes on `[lo, hi]`: `layer_nodes` uniform elements across a
    /// boundary layer of width `layer` at `lo`, geometric growth by `1.2` up
    /// to `fine_step`, uniform `fine_step` up to depth `fine_depth`, then
    /// roughly `coarse_step`.
    pub fn layered_nodes(
        lo: f64,
        hi: f64,
        layer: f64,
        layer_nodes: usize,
        fine_depth: f64,
        fine_step: f64,
        coarse_step: f64,
    ) -> Vec<f64> {
        let mut t = vec![lo];
        let mut s = 0.0;
        let step = layer / layer_nodes as f64;
        for i in 1..=layer_nodes {
            s = step * i as f64;
            t.push(lo + s);
        }
        let mut h = step;
        while h < fine_step && s + h < fine_depth {
            h = (h * 1.2).min(fine_step);
            s += h;
            t.push(lo + s);
        }
        let fine = ((fine_depth - s) / fine_step).ceil().max(0.0) as usize;
        let end = fine_depth.min(hi - lo);
        for i in 1..=fine {
            t.push(lo + s + (end - s) * i as f64 / fine as f64);
        }
        s = end;
        let rest = ((hi - lo - s) / coarse_step).ceil() as usize;
        for i in 1..=rest {
            t.push(lo + s + (hi - lo - s) * i as f64 / rest as f64);
        }
        if let Some(last) = t.last_mut() {
            *last = hi;
        }
        t
    }
}

struct Spectral {
    n: [usize; 2],
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    k: [Vec<f64>; 2],
}

impl Spectral {
    fn new(grid: &TorusGrid) -> Spectral {
        let mut planner = FftPlanner::new();
        let wavenumbers = |n: usize, period: f64| -> Vec<f64> {
            (0..n)
                .map(|m| {
                    let m = m as i64;
                    let n = n as i64;
                    let signed = if m < n / 2 { m } else if m == n / 2 { 0 } else { m - n };
                    2.0 * PI * signed as f64 / period
                })
                .collect()
        };
        Spectral {
            n: grid.nx,
            fwd: [planner.plan_fft_forward(grid.nx[0]), planner.plan_fft_forward(grid.nx[1])],
            inv: [planner.plan_fft_inverse(grid.nx[0]), planner.plan_fft_inverse(grid.nx[1])],
            k: [wavenumbers(grid.nx[0], grid.periods[0]), wavenumbers(grid.nx[1], grid.periods[1])],
        }
    }

    fn transform(&self, buf: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [n1, n2] = self.n;
        plans[0].process(buf);
        let mut cols = vec![Complex::default(); n1 * n2];
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                cols[i2 + n2 * i1] = buf[i1 + n1 * i2];
            }
        }
        plans[1].process(&mut cols);
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                buf[i1 + n1 * i2] = cols[i2 + n2 * i1];
            }
        }
    }

    /// `(∂f/∂x1, ∂f/∂x2)` of one `t` slice.
    fn gradient(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let [n1, n2] = self.n;
        let mut hat: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut hat, &self.fwd);
        let scale = 1.0 / (n1 * n2) as f64;
        let mut out = [Vec::new(), Vec::new()];
        for (dir, slot) in out.iter_mut().enumerate() {
            let mut d: Vec<Complex<f64>> = (0..n1 * n2)
                .map(|idx| {
                    let k = if dir == 0 { self.k[0][idx % n1] } else { self.k[1][idx / n1] };
                    hat[idx] * Complex::new(0.0, k * scale)
                })
                .collect();
            self.transform(&mut d, &self.inv);
            *slot = d.iter().map(|c| c.re).collect();
        }
        out
    }
}

struct SliceData {
    weight: Vec<f64>,
    values: Vec<Vec<f64>>,
    grads: Vec<[Vec<f64>; 2]>,
}

/// A family of grid functions on `(T² × [t0, tN], h² (g_flat + dt²))` with
/// `dim Σ = 2`, i.e. `n = 2`.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub grid: TorusGrid,
    /// Cross-section dimension; only the exponents depend on it.
    pub n: usize,
    pub factor: Field,
    pub functions: Vec<Field>,
}

impl GridProblem {
    fn slice_data(&self, grid: &TorusGrid, spectral: &Spectral, it: usize, exponent: i32) -> SliceData {
        let weight = self.factor.slice(grid, it).iter().map(|h| h.powi(exponent)).collect();
        let values: Vec<Vec<f64>> = self.functions.iter().map(|f| f.slice(grid, it)).collect();
        let zero = values.iter().all(|v| v.iter().all(|&x| x == 0.0));
        let grads = if zero {
            Vec::new()
        } else {
            values.iter().map(|v| spectral.gradient(v)).collect()
        };
        SliceData { weight, values, grads }
    }

    fn element(a: &SliceData, b: &SliceData, dt: f64, area: f64) -> DMatrix<f64> {
        let k = a.values.len();
        let mut m = DMatrix::zeros(k, k);
        if a.grads.is_empty() && b.grads.is_empty() {
            return m;
        }
        let g = |s: &SliceData, i: usize, d: usize, p: usize| -> f64 {
            if s.grads.is_empty() {
                0.0
            } else {
                s.grads[i][d][p]
            }
        };
        for i in 0..k {
            for j in i..k {
                let mut sum = 0.0;
                for p in 0..a.weight.len() {
                    let (w0, w1) = (a.weight[p], b.weight[p]);
                    // exact ∫ w u v for linear w, u, v over one element
                    let lin = |u0: f64, u1: f64, v0: f64, v1: f64| {
                        w0 * (3.0 * u0 * v0 + u0 * v1 + u1 * v0 + u1 * v1)
                            + w1 * (u0 * v0 + u0 * v1 + u1 * v0 + 3.0 * u1 * v1)
                    };
                    let mut s = 0.0;
                    for d in 0..2 {
                        s += lin(g(a, i, d, p), g(b, i, d, p), g(a, j, d, p), g(b, j, d, p));
                    }
                    let di = b.values[i][p] - a.values[i][p];
                    let dj = b.values[j][p] - a.values[j][p];
                    sum += s * dt / 12.0 + di * dj / dt * 0.5 * (w0 + w1);
                }
                m[(i, j)] = sum * area;
                m[(j, i)] = sum * area;
            }
        }
        m
    }

    fn gram_on(&self, grid: &TorusGrid) -> (DMatrix<f64>, DMatrix<f64>) {
        const CHUNK: usize = 32;
        let k = self.functions.len();
        let spectral = Spectral::new(grid);
        let e_exp = self.n as i32 - 1;
        let area = grid.cell_area();
        let last = grid.t.len() - 1;
        let mut energy = DMatrix::zeros(k, k);
        let mut start = 0;
        while start < last {
            let end = (start + CHUNK).min(last);
            let data: Vec<SliceData> = (start..=end)
                .into_par_iter()
                .map(|it| self.slice_data(grid, &spectral, it, e_exp))
                .collect();
            let parts: Vec<DMatrix<f64>> = (0..end - start)
                .into_par_iter()
                .map(|e| Self::element(&data[e], &data[e + 1], grid.t[start + e + 1] - grid.t[start + e], area))
                .collect();
            for m in parts {
                energy += m;
            }
            start = end;
        }

        let mut boundary = DMatrix::zeros(k, k);
        for it in [0, last] {
            let w: Vec<f64> = self.factor.slice(grid, it).iter().map(|h| h.powi(self.n as i32)).collect();
            let vals: Vec<Vec<f64>> = self.functions.iter().map(|f| f.slice(grid, it)).collect();
            for i in 0..k {
                for j in i..k {
                    let s: f64 = (0..w.len()).map(|p| w[p] * vals[i][p] * vals[j][p]).sum::<f64>() * area;
                    boundary[(i, j)] += s;
                    if i != j {
                        boundary[(j, i)] += s;
                    }
                }
            }
        }
        (energy, boundary)
    }

    fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::DegenerateFamily("empty test family".into()));
        }
        for f in self.functions.iter().chain(std::iter::once(&self.factor)) {
            if let Field::Samples(v) = f {
                if v.len() != self.grid.len() {
                    return Err(Error::DegenerateFamily(format!(
                        "sampled field has {} values, grid has {}",
                        v.len(),
                        self.grid.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn refinable(&self) -> bool {
        self.functions
            .iter()
            .chain(std::iter::once(&self.factor))
            .all(|f| matches!(f, Field::Function(_)))
    }

    /// Energy and boundary Gram matrices on the stored grid.
    pub fn gram(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.validate()?;
        Ok(self.gram_on(&self.grid))
    }

    /// Min-max bounds on the stored grid; when every field is analytic the
    /// grid is refined `levels` times and the last change is the error bar.
    pub fn upper_bound(&self, levels: u32) -> Result<RayleighBound> {
        self.validate()?;
        let (e, b) = self.gram_on(&self.grid);
        let mut vals = pencil_eigenvalues(&e, &b)?;
        let mut error_bar = None;
        if self.refinable() {
            let mut grid = self.grid.clone();
            for _ in 0..levels {
                grid = grid.refined();
                let (e, b) = self.gram_on(&grid);
                let next = pencil_eigenvalues(&e, &b)?;
                error_bar = Some((next[next.len() - 1] - vals[vals.len() - 1]).abs());
                vals = next;
            }
        }
        Ok(RayleighBound {
            bound: vals[vals.len() - 1],
            eigenvalues: vals,
            error_bar,
        })
    }
}

/// Disjoint bumps that make `σ_1, …, σ_k` small. On `T² × [-L, L]` the
/// conformal factor `h_m` equals `1/m` on most of the half-ball of radius
/// `ball_radius` around a boundary point `p`, rises to 1 across a boundary
/// layer of width `1/m²` and across the outer part of the ball, and is 1
/// elsewhere. The test functions are `cos²` bumps of radius
/// `ball_radius / (2k)` centred on the boundary inside that ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpScenario {
    pub periods: [f64; 2],
    pub half_length: f64,
    pub ball_radius: f64,
    pub bumps: usize,
    /// Points per torus direction on the coarsest grid.
    pub resolution: usize,
    /// `t` elements across the bump radius on the coarsest grid.
    pub bump_elements: usize,
}

impl Default for BumpScenario {
    fn default() -> Self {
        BumpScenario {
            periods: [2.0 * PI, 2.0 * PI],
            half_length: 2.0,
            ball_radius: 3.0,
            bumps: 3,
            resolution: 128,
            bump_elements: 40,
        }
    }
}

fn torus_delta(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

impl BumpScenario {
    fn centre(&self) -> (f64, f64) {
        (0.5 * self.periods[0], 0.5 * self.periods[1])
    }

    pub fn bump_radius(&self) -> f64 {
        self.ball_radius / (2.0 * self.bumps as f64)
    }

    fn validate(&self) -> Result<()> {
        let half = 0.5 * self.periods[0].min(self.periods[1]);
        if !(self.ball_radius > 0.0 && self.ball_radius < half) {
            return Err(Error::config("ball_radius", format!("must lie in (0, {half})")));
        }
        if self.ball_radius >= 2.0 * self.half_length {
            return Err(Error::config("ball_radius", "the ball must not reach the far boundary"));
        }
        if self.bumps == 0 {
            return Err(Error::config("bumps", "need at least one bump"));
        }
        Ok(())
    }

    /// The conformal factor `h_m`.
    pub fn factor(&self, m: f64) -> FieldFn {
        let (c1, c2) = self.centre();
        let (p1, p2) = (self.periods[0], self.periods[1]);
        let (eps, l) = (self.ball_radius, self.half_length);
        let layer = 1.0 / (m * m);
        Arc::new(move |x1, x2, t| {
            let (d1, d2, s) = (torus_delta(x1 - c1, p1), torus_delta(x2 - c2, p2), t + l);
            let rho = (d1 * d1 + d2 * d2 + s * s).sqrt();
            let chi = 1.0 - smoothstep((rho / eps - 0.6) / 0.4);
            let eta = smoothstep(s / layer);
            1.0 - (1.0 - 1.0 / m) * chi * eta
        })
    }

    /// The bumps, spaced `2.4 r` apart along `x1`.
    pub fn functions(&self) -> Vec<Field> {
        let (c1, c2) = self.centre();
        let r = self.bump_radius();
        let (p1, p2) = (self.periods[0], self.periods[1]);
        let l = self.half_length;
        (0..self.bumps)
            .map(|j| {
                let x0 = c1 + 2.4 * r * (j as f64 - 0.5 * (self.bumps as f64 - 1.0));
                Field::function(move |x1, x2, t| {
                    let (d1, d2, s) = (torus_delta(x1 - x0, p1), torus_delta(x2 - c2, p2), t + l);
                    let rho = (d1 * d1 + d2 * d2 + s * s).sqrt();
                    if rho >= r {
                        0.0
                    } else {
                        (0.5 * PI * rho / r).cos().powi(2)
                    }
                })
            })
            .collect()
    }

    pub fn problem(&self, m: f64) -> Result<GridProblem> {
        self.validate()?;
        if !(m >= 1.0) {
            return Err(Error::config("m", "the scale parameter must be ≥ 1"));
        }
        let r = self.bump_radius();
        let fine = r / self.bump_elements as f64;
        let layer = 1.0 / (m * m);
        let t = TorusGrid::layered_nodes(
            -self.half_length,
            self.half_length,
            layer.min(0.5 * fine),
            8,
            r * 1.02,
            fine,
            0.25,
        );
        Ok(GridProblem {
            grid: TorusGrid::new(self.periods, [self.resolution; 2], t)?,
            n: 2,
            factor: Field::Function(self.factor(m)),
            functions: self.functions(),
        })
    }
}

/// Outcome of testing `∫|df|² ≥ (μ/2) min(|V1|, |V2|) (m1 - m2)²` on random
/// functions over `Ω = T² × [a, b]` with the product metric, where `m_i` are
/// the means over the two halves `V1`, `V2` and `μ` is the first positive
/// Neumann eigenvalue of `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannPoincareReport {
    pub trials: usize,
    pub mu: f64,
    /// Smallest `lhs / rhs` over trials with `rhs > 0`.
    pub worst_ratio: f64,
    /// Smallest `lhs - rhs` over all trials.
    pub min_slack: f64,
    pub violations: usize,
    pub pass: bool,
}

/// A random trigonometric-polynomial-times-cubic function on `T² × [a, b]`.
fn random_function(rng: &mut ChaCha8Rng, periods: [f64; 2], a: f64, b: f64) -> Field {
    let mut terms = Vec::new();
    for m1 in -2i32..=2 {
        for m2 in -2i32..=2 {
            let poly: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let phase = rng.gen_range(0.0..2.0 * PI);
            terms.push((m1, m2, poly, phase));
        }
    }
    Field::function(move |x1, x2, t| {
        let s = (t - a) / (b - a);
        terms
            .iter()
            .map(|(m1, m2, c, phase)| {
                let arg = 2.0 * PI * (*m1 as f64 * x1 / periods[0] + *m2 as f64 * x2 / periods[1]) + phase;
                arg.cos() * (c[0] + s * (c[1] + s * (c[2] + s * c[3])))
            })
            .sum()
    })
}

/// Tolerated `rhs - lhs` per trial.
pub const NP_SLACK: f64 = 1e-8;

pub fn neumann_poincare_check(periods: [f64; 2], a: f64, b: f64, mu: f64, trials: usize, seed: u64) -> Result<NeumannPoincareReport> {
    if !(b > a) {
        return Err(Error::ZeroVolume(format!("[{a}, {b}] is empty")));
    }
    let elements = 64;
    let t: Vec<f64> = (0..=elements).map(|i| a + (b - a) * i as f64 / elements as f64).collect();
    let grid = TorusGrid::new(periods, [16, 16], t)?;
    let mid = elements / 2;
    let area = grid.cell_area();
    let vol = periods[0] * periods[1] * 0.5 * (b - a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let f = random_function(&mut rng, periods, a, b);
        let samples = f.sample(&grid);
        let problem = GridProblem {
            grid: grid.clone(),
            n: 1,
            factor: Field::function(|_, _, _| 1.0),
            functions: vec![Field::Samples(Arc::new(samples.clone()))],
        };
        let lhs = problem.gram()?.0[(0, 0)];
        // means of the piecewise-linear interpolant over the two halves
        let slab_sum = |lo: usize, hi: usize| -> f64 {
            let per_node: Vec<f64> = (lo..=hi)
                .map(|it| {
                    let n = grid.nx[0] * grid.nx[1];
                    samples[it * n..(it + 1) * n].iter().sum::<f64>() * area
                })
                .collect();
            per_node
                .windows(2)
                .zip(lo..hi)
                .map(|(w, it)| 0.5 * (w[0] + w[1]) * (grid.t[it + 1] - grid.t[it]))
                .sum()
        };
        let m1 = slab_sum(0, mid) / vol;
        let m2 = slab_sum(mid, elements) / vol;
        let rhs = 0.5 * mu * vol * (m1 - m2).powi(2);
        if rhs > 0.0 {
            worst = worst.min(lhs / rhs);
        }
        min_slack = min_slack.min(lhs - rhs);
        if lhs - rhs < -NP_SLACK {
            violations += 1;
        }
    }
    Ok(NeumannPoincareReport {
        trials,
        mu,
        worst_ratio: worst,
        min_slack,
        violations,
        pass: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Family, MetricFamily, Profile, ProfileLabel};
    use crate::rayleigh::{minmax_upper_bound, FamilyKind, ModeTestFunction, TestFunctionFamily};

    #[test]
    fn spectral_gradient_of_trig_polynomial() {
        let grid = TorusGrid::new([2.0 * PI, 4.0], [16, 8], vec![0.0, 1.0]).unwrap();
        let sp = Spectral::new(&grid);
        let f: Vec<f64> = (0..8)
            .flat_map(|i2| (0..16).map(move |i1| (i1, i2)))
            .map(|(i1, i2)| {
                let (x1, x2) = grid.x(i1, i2);
                (3.0 * x1).sin() + (PI * x2).cos()
            })
            .collect();
        let [g1, g2] = sp.gradient(&f);
        for i2 in 0..8 {
            for i1 in 0..16 {
                let (x1, x2) = grid.x(i1, i2);
                let p = i1 + 16 * i2;
                assert!((g1[p] - 3.0 * (3.0 * x1).cos()).abs() < 1e-12);
                assert!((g2[p] + PI * (PI * x2).sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_mode_form_for_x_independent_factor() {
        // a(t) cos(x1) / ‖cos‖ on T² × [-1, 1] against the mode form with
        // λ = 1; with h = 1 both quadratures are exact for P1 in t
        let periods = [2.0 * PI, 2.0 * PI];
        let norm = (0.5 * periods[0] * periods[1]).sqrt();
        let nodes: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let values: Vec<f64> = nodes.iter().map(|t| (1.3 * t).exp() + 0.2 * t).collect();
        let a = ModeTestFunction::new(0, 1.0, nodes.clone(), values.clone()).unwrap();
        let b_vals: Vec<f64> = nodes.iter().map(|t| 1.0 + t - t * t).collect();
        let b = ModeTestFunction::new(0, 1.0, nodes.clone(), b_vals).unwrap();
        let metric = MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap());
        let fam = TestFunctionFamily {
            kind: FamilyKind::Custom,
            functions: vec![a.clone(), b.clone()],
        };
        let mode = minmax_upper_bound(&fam, &metric).unwrap();
        let grid = TorusGrid::new(periods, [8, 8], nodes).unwrap();
        let lift = |f: ModeTestFunction| Field::function(move |x1, _, t| f.value(t) * x1.cos() / norm);
        let problem = GridProblem {
            grid,
            n: 2,
            factor: Field::function(|_, _, _| 1.0),
            functions: vec![lift(a), lift(b)],
        };
        let g = problem.upper_bound(0).unwrap();
        for (x, y) in g.eigenvalues.iter().zip(&mode.eigenvalues) {
            assert!((x - y).abs() <= 1e-6 * y, "{x} vs {y}");
        }
    }

    #[test]
    fn matches_mode_form_with_conformal_profile() {
        let periods = [2.0 * PI, 2.0 * PI];
        let norm = (0.5 * periods[0] * periods[1]).sqrt();
        let profile = Profile::make(ProfileLabel::Conf1, 0.1, 1.0, true).unwrap();
        let (lo, hi) = profile.domain();
        let nodes: Vec<f64> = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0).collect();
        let values: Vec<f64> = nodes.iter().map(|t| (2.0 * t).cos() + 0.5).collect();
        let a = ModeTestFunction::new(0, 1.0, nodes.clone(), values).unwrap();
        let metric = MetricFamily::new(Family::Conformal, 2, profile.clone());
        let fam = TestFunctionFamily {
            kind: FamilyKind::Custom,
            functions: vec![a.clone()],
        };
        let mode = minmax_upper_bound(&fam, &metric).unwrap();
        let grid = TorusGrid::new(periods, [4, 4], nodes).unwrap();
        let p = profile.clone();
        let problem = GridProblem {
            grid,
            n: 2,
            factor: Field::function(move |_, _, t| p.value(t)),
            functions: vec![Field::function(move |x1, _, t| a.value(t) * x1.cos() / norm)],
        };
        let g = problem.upper_bound(0).unwrap();
        assert!((g.bound - mode.bound).abs() <= 1e-6 * mode.bound, "{} vs {}", g.bound, mode.bound);
    }

    #[test]
    fn layered_nodes_increase_and_cover() {
        let t = TorusGrid::layered_nodes(-2.0, 2.0, 1e-6, 8, 0.51, 0.0125, 0.25);
        assert_eq!(t[0], -2.0);
        assert_eq!(*t.last().unwrap(), 2.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((t[8] - (-2.0 + 1e-6)).abs() < 1e-15);
        assert!(t.windows(2).all(|w| w[1] - w[0] <= 0.25 + 1e-12));
    }

    #[test]
    fn bump_factor_shape() {
        let sc = BumpScenario::default();
        let h = sc.factor(100.0);
        let (c1, c2) = (PI, PI);
        assert_eq!(h(c1, c2, -2.0), 1.0);
        assert!((h(c1, c2, -1.0) - 0.01).abs() < 1e-15);
        assert_eq!(h(0.0, 0.0, 0.0), 1.0);
        assert_eq!(h(c1, c2, 2.0), 1.0);
    }

    #[test]
    fn bump_bounds_decrease_with_m() {
        let sc = BumpScenario {
            resolution: 32,
            bump_elements: 10,
            ..BumpScenario::default()
        };
        let mut prev = f64::INFINITY;
        for m in [10.0, 100.0] {
            let b = sc.problem(m).unwrap().upper_bound(0).unwrap();
            assert_eq!(b.k(), 3);
            assert!(b.bound < prev);
            prev = b.bound;
        }
        assert!(prev < 0.2, "{prev}");
    }

    #[test]
    fn load_rejects_wrong_size() {
        let grid = TorusGrid::new([1.0, 1.0], [4, 4], vec![0.0, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "1, 1, 1\n").unwrap();
        assert!(matches!(Field::load(&path, &grid), Err(Error::Config { .. })));
        let ok: String = (0..32).map(|_| "1.5\n").collect();
        std::fs::write(&path, ok).unwrap();
        let f = Field::load(&path, &grid).unwrap();
        assert_eq!(f.sample(&grid), vec![1.5; 32]);
        let bin = dir.path().join("h.bin");
        let bytes: Vec<u8> = (0..32).flat_map(|i| (i as f64).to_le_bytes()).collect();
        std::fs::write(&bin, bytes).unwrap();
        assert_eq!(Field::load(&bin, &grid).unwrap().sample(&grid)[31], 31.0);
    }

    #[test]
    fn neumann_poincare_holds_on_random_functions() {
        let rep = neumann_poincare_check([2.0 * PI, 2.0 * PI], 1.0, 2.0, 1.0, 20, 7).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.worst_ratio >= 1.0);
    }
}
