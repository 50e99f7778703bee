//! One Fourier mode: P1 finite elements for `-(p a')' + q a = 0` and the
//! associated Steklov, Steklov–Dirichlet and Neumann eigenproblems.
//!
//! For a cross-section eigenvalue `λ` the weights are `p = h^{α_p}`,
//! `q = λ h^{α_q}` and `r = h^{α_r}` with exponents taken from the
//! [`MetricFamily`]. Element integrals use the 5-point Gauss rule; mesh
//! nodes sit on every profile junction so each element sees one smooth
//! piece only.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, MeshControl};
use crate::profile::MetricFamily;
use crate::quadrature::gauss5_points;
use crate::tridiag::{self, ExcessTridiag, FarEnd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    Steklov,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, Default)]
struct ElementIntegrals {
    /// `∫ p / h_e²`
    stiffness: f64,
    /// `∫ q̂ φ_L²`, `∫ q̂ φ_L φ_R`, `∫ q̂ φ_R²` with `q̂ = h^{α_q}`
    ll: f64,
    lr: f64,
    rr: f64,
}

/// Assembled operator of one mode on one mesh.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub operator: ExcessTridiag,
    lambda: f64,
    elements: Vec<ElementIntegrals>,
}

impl Assembly {
    /// `E(u, u) = ∫ p u'² + q u²`, summed element by element.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.elements
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (a, b) = (u[i], u[i + 1]);
                e.stiffness * (b - a) * (b - a) + self.lambda * (e.ll * a * a + 2.0 * e.lr * a * b + e.rr * b * b)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProblem {
    pub lambda: f64,
    pub metric: MetricFamily,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
}

/// Per-mode Dirichlet-to-Neumann matrix on the Steklov endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtnMatrix {
    pub endpoints: Vec<Endpoint>,
    /// Row-major, `size × size`.
    pub matrix: Vec<f64>,
    /// Boundary weights `h^n` at the Steklov endpoints.
    pub weights: Vec<f64>,
    /// Generalized eigenvalues of `(Λ, diag(w))`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Boundary traces, normalized so that `Σ w_i v_i² = 1`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl DtnMatrix {
    pub fn size(&self) -> usize {
        self.endpoints.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.size() + j]
    }
}

/// A discrete harmonic extension together with its scaled residual
/// `‖A a - b‖∞ / (‖A‖∞ ‖a‖∞)`.
#[derive(Debug, Clone)]
pub struct Extension {
    pub values: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct NeumannPairs {
    pub values: Vec<f64>,
    /// Nodal vectors (zero at Dirichlet nodes), `∫ r v² = 1`.
    pub vectors: Vec<Vec<f64>>,
}

impl ModeProblem {
    pub fn new(lambda: f64, metric: MetricFamily, left: BoundaryCondition, right: BoundaryCondition) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidModeProblem(format!("λ must be finite and ≥ 0, got {lambda}")));
        }
        Ok(ModeProblem {
            lambda,
            metric,
            left,
            right,
        })
    }

    /// Steklov conditions at both ends.
    pub fn two_sided(lambda: f64, metric: MetricFamily) -> Result<Self> {
        Self::new(lambda, metric, BoundaryCondition::Steklov, BoundaryCondition::Steklov)
    }

    /// Steklov at the left end, Dirichlet at the right end.
    pub fn steklov_dirichlet(lambda: f64, metric: MetricFamily) -> Result<Self> {
        Self::new(lambda, metric, BoundaryCondition::Steklov, BoundaryCondition::Dirichlet)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.metric.profile.domain()
    }

    pub fn mesh(&self, control: &MeshControl) -> Result<Mesh1D> {
        Mesh1D::graded(&self.metric.profile, self.lambda, control)
    }

    fn check_mesh(&self, mesh: &Mesh1D) -> Result<()> {
        let (a, b) = self.interval();
        let nodes = mesh.nodes();
        let tol = 1e-12 * (b - a);
        if (nodes[0] - a).abs() > tol || (nodes[nodes.len() - 1] - b).abs() > tol {
            return Err(Error::InvalidModeProblem(format!(
                "mesh [{}, {}] does not cover the interval [{a}, {b}]",
                nodes[0],
                nodes[nodes.len() - 1]
            )));
        }
        Ok(())
    }

    pub fn assemble(&self, mesh: &Mesh1D) -> Result<Assembly> {
        self.check_mesh(mesh)?;
        let (ap, aq, _) = self.metric.exponents();
        let profile = &self.metric.profile;
        let nodes = mesh.nodes();
        let mut elements = Vec::with_capacity(mesh.element_count());
        let mut s = vec![0.0; nodes.len()];
        let mut c = Vec::with_capacity(mesh.element_count());
        for (i, w) in nodes.windows(2).enumerate() {
            let (t0, t1) = (w[0], w[1]);
            let width = t1 - t0;
            let mut e = ElementIntegrals::default();
            let (mut row_l, mut row_r) = (0.0, 0.0);
            for (t, wt) in gauss5_points(t0, t1) {
                let h = profile.value(t);
                let phi_r = (t - t0) / width;
                let phi_l = 1.0 - phi_r;
                let q = h.powi(aq) * wt;
                e.stiffness += h.powi(ap) * wt;
                e.ll += q * phi_l * phi_l;
                e.lr += q * phi_l * phi_r;
                e.rr += q * phi_r * phi_r;
                row_l += q * phi_l;
                row_r += q * phi_r;
            }
            e.stiffness /= width * width;
            s[i] += self.lambda * row_l;
            s[i + 1] += self.lambda * row_r;
            c.push(-e.stiffness + self.lambda * e.lr);
            elements.push(e);
        }
        Ok(Assembly {
            operator: ExcessTridiag { s, c },
            lambda: self.lambda,
            elements,
        })
    }

    /// Consistent `r`-mass matrix as (diagonal, off-diagonal).
    pub fn mass(&self, mesh: &Mesh1D) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_mesh(mesh)?;
        let (_, _, ar) = self.metric.exponents();
        let nodes = mesh.nodes();
        let mut diag = vec![0.0; nodes.len()];
        let mut off = Vec::with_capacity(mesh.element_count());
        for (i, w) in nodes.windows(2).enumerate() {
            let (t0, t1) = (w[0], w[1]);
            let (mut ll, mut lr, mut rr) = (0.0, 0.0, 0.0);
            for (t, wt) in gauss5_points(t0, t1) {
                let r = self.metric.profile.value(t).powi(ar) * wt;
                let phi_r = (t - t0) / (t1 - t0);
                let phi_l = 1.0 - phi_r;
                ll += r * phi_l * phi_l;
                lr += r * phi_l * phi_r;
                rr += r * phi_r * phi_r;
            }
            diag[i] += ll;
            diag[i + 1] += rr;
            off.push(lr);
        }
        Ok((diag, off))
    }

    fn far_end(bc: BoundaryCondition) -> FarEnd {
        match bc {
            BoundaryCondition::Neumann => FarEnd::Free,
            _ => FarEnd::Dirichlet,
        }
    }

    /// Discrete minimizer of `E(a, a)` with the given endpoint values.
    ///
    /// Steklov endpoints require a value, Dirichlet endpoints default to
    /// zero and Neumann endpoints must not carry one.
    pub fn harmonic_extension(&self, mesh: &Mesh1D, left: Option<f64>, right: Option<f64>) -> Result<Extension> {
        let data = |bc: BoundaryCondition, v: Option<f64>, side: &str| -> Result<Option<f64>> {
            match (bc, v) {
                (BoundaryCondition::Neumann, Some(_)) => Err(Error::InvalidModeProblem(format!(
                    "the {side} end is a Neumann end and carries no data"
                ))),
                (BoundaryCondition::Neumann, None) => Ok(None),
                (BoundaryCondition::Dirichlet, v) => Ok(Some(v.unwrap_or(0.0))),
                (BoundaryCondition::Steklov, Some(v)) => Ok(Some(v)),
                (BoundaryCondition::Steklov, None) => Err(Error::InvalidModeProblem(format!(
                    "the {side} end is a Steklov end and needs a value"
                ))),
            }
        };
        let left = data(self.left, left, "left")?;
        let right = data(self.right, right, "right")?;
        if left.is_none() && right.is_none() {
            return Err(if self.lambda == 0.0 {
                Error::ZeroModeNoUniqueExtension
            } else {
                Error::InvalidModeProblem("no endpoint carries data".into())
            });
        }
        let asm = self.assemble(mesh)?;
        let op = &asm.operator;
        let n = op.nodes();
        let mut values = vec![0.0; n];
        let mut add = |from_left: bool, value: f64, far: FarEnd| {
            if value == 0.0 {
                return;
            }
            let elim = if from_left {
                op.eliminate_toward_start(far)
            } else {
                op.reversed().eliminate_toward_start(far)
            };
            let mut x = value;
            let idx = |j: usize| if from_left { j } else { n - 1 - j };
            values[idx(0)] += x;
            for (j, r) in elim.ratio.iter().enumerate() {
                x *= r;
                if x == 0.0 {
                    break;
                }
                values[idx(j + 1)] += x;
            }
        };
        match (left, right) {
            (Some(a), Some(b)) => {
                add(true, a, FarEnd::Dirichlet);
                add(false, b, FarEnd::Dirichlet);
                values[n - 1] = b;
                values[0] = a;
            }
            (Some(a), None) => add(true, a, FarEnd::Free),
            (None, Some(b)) => add(false, b, FarEnd::Free),
            (None, None) => unreachable!(),
        }
        // residual over the rows that are equations (not data rows)
        let y = op.apply(&values);
        let first = usize::from(left.is_some());
        let last = if right.is_some() { n - 1 } else { n };
        let res = y[first..last].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = op.norm_inf() * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = if scale > 0.0 { res / scale } else { 0.0 };
        if residual > 1e-12 {
            log::warn!("harmonic extension residual {residual:e} exceeds 1e-12 (λ = {})", self.lambda);
        }
        Ok(Extension { values, residual })
    }

    /// The Dirichlet-to-Neumann matrix on the Steklov endpoints, with its
    /// generalized eigenvalues against the boundary weights.
    pub fn dtn_matrix(&self, mesh: &Mesh1D) -> Result<DtnMatrix> {
        let (t0, t1) = self.interval();
        let steklov: Vec<Endpoint> = [(self.left, Endpoint::Left), (self.right, Endpoint::Right)]
            .into_iter()
            .filter(|(bc, _)| *bc == BoundaryCondition::Steklov)
            .map(|(_, e)| e)
            .collect();
        let weight = |e: Endpoint| match e {
            Endpoint::Left => self.metric.boundary_weight(t0),
            Endpoint::Right => self.metric.boundary_weight(t1),
        };
        match steklov.len() {
            0 => Err(Error::InvalidModeProblem("no Steklov endpoint".into())),
            1 => {
                let asm = self.assemble(mesh)?;
                let (op, far) = match steklov[0] {
                    Endpoint::Left => (asm.operator, Self::far_end(self.right)),
                    Endpoint::Right => (asm.operator.reversed(), Self::far_end(self.left)),
                };
                let schur = if self.lambda == 0.0 && far == FarEnd::Free {
                    0.0
                } else {
                    op.eliminate_toward_start(far).schur
                };
                let w = weight(steklov[0]);
                Ok(DtnMatrix {
                    endpoints: steklov,
                    matrix: vec![schur],
                    weights: vec![w],
                    eigenvalues: vec![schur / w],
                    eigenvectors: vec![vec![1.0 / w.sqrt()]],
                })
            }
            _ => {
                let asm = self.assemble(mesh)?;
                let op = &asm.operator;
                let (w0, w1) = (weight(Endpoint::Left), weight(Endpoint::Right));
                let (d0, d1, off, det) = if self.lambda == 0.0 {
                    let resistance: f64 = op.c.iter().map(|c| -1.0 / c).sum();
                    let g = 1.0 / resistance;
                    (g, g, -g, 0.0)
                } else {
                    let from_left = op.eliminate_toward_start(FarEnd::Dirichlet);
                    let rev = op.reversed();
                    let d1 = rev.eliminate_toward_start(FarEnd::Dirichlet).schur;
                    let f1 = rev.eliminate_toward_start(FarEnd::Free).schur;
                    let n = op.c.len();
                    let reach: f64 = from_left.ratio[..n - 1].iter().product();
                    let off = op.c[n - 1] * reach;
                    (from_left.schur, d1, off, from_left.schur * f1)
                };
                let (values, vectors) = generalized_2x2(d0, d1, off, det, w0, w1);
                Ok(DtnMatrix {
                    endpoints: steklov,
                    matrix: vec![d0, off, off, d1],
                    weights: vec![w0, w1],
                    eigenvalues: values.to_vec(),
                    eigenvectors: vectors.iter().map(|v| v.to_vec()).collect(),
                })
            }
        }
    }

    /// The single eigenvalue of a mode with one Steklov and one Dirichlet end.
    pub fn steklov_dirichlet_eigenvalue(&self, mesh: &Mesh1D) -> Result<f64> {
        let ok = matches!(
            (self.left, self.right),
            (BoundaryCondition::Steklov, BoundaryCondition::Dirichlet)
                | (BoundaryCondition::Dirichlet, BoundaryCondition::Steklov)
        );
        if !ok {
            return Err(Error::InvalidModeProblem(
                "a Steklov–Dirichlet mode needs one Steklov and one Dirichlet end".into(),
            ));
        }
        Ok(self.dtn_matrix(mesh)?.eigenvalues[0])
    }

    /// The `k` smallest eigenvalues of `E(a, b) = μ ∫ r a b` with Neumann or
    /// Dirichlet ends.
    pub fn neumann_eigenvalues(&self, mesh: &Mesh1D, k: usize) -> Result<Vec<f64>> {
        Ok(self.neumann_eigenpairs(mesh, k)?.values)
    }

    pub fn neumann_eigenpairs(&self, mesh: &Mesh1D, k: usize) -> Result<NeumannPairs> {
        if self.left == BoundaryCondition::Steklov || self.right == BoundaryCondition::Steklov {
            return Err(Error::InvalidModeProblem(
                "Neumann eigenvalues need Neumann or Dirichlet ends".into(),
            ));
        }
        if k == 0 {
            return Err(Error::InvalidModeProblem("requested zero eigenvalues".into()));
        }
        let asm = self.assemble(mesh)?;
        let (md, mo) = self.mass(mesh)?;
        let op = &asm.operator;
        let n = op.nodes();
        let lo_idx = usize::from(self.left == BoundaryCondition::Dirichlet);
        let hi_idx = n - usize::from(self.right == BoundaryCondition::Dirichlet);
        let dim = hi_idx.saturating_sub(lo_idx);
        if k > dim {
            return Err(Error::TooManyEigenvalues {
                requested: k,
                dimension: dim,
            });
        }
        let ad: Vec<f64> = (lo_idx..hi_idx).map(|i| op.diag(i)).collect();
        let ao: Vec<f64> = op.c[lo_idx..hi_idx - 1].to_vec();
        let bd = md[lo_idx..hi_idx].to_vec();
        let bo = mo[lo_idx..hi_idx - 1].to_vec();
        let zero_mode = self.lambda == 0.0 && dim == n;
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for index in 0..k {
            let mu = if index == 0 && zero_mode {
                0.0
            } else {
                let lo = values.last().copied().unwrap_or(0.0);
                tridiag::bisect_eigenvalue(&ad, &ao, &bd, &bo, index, lo, 2.0 * lo.max(1.0))
            };
            let sub = inverse_iteration(&ad, &ao, &bd, &bo, mu, zero_mode && index == 0);
            let mut full = vec![0.0; n];
            full[lo_idx..hi_idx].copy_from_slice(&sub);
            // The Rayleigh quotient of the converged vector is accurate to
            // second order, where bisection on pivots is limited by
            // cancellation against ‖A‖.
            let mu = if mu == 0.0 { 0.0 } else { asm.energy(&full) / mass_norm(&md, &mo, &full) };
            values.push(mu);
            vectors.push(full);
        }
        Ok(NeumannPairs { values, vectors })
    }

    /// Rows `t, h(t), a(t)` for diagnostics.
    pub fn write_csv(&self, mesh: &Mesh1D, values: &[f64], out: &mut impl Write) -> Result<()> {
        writeln!(out, "t,h,a")?;
        for (t, a) in mesh.nodes().iter().zip(values) {
            writeln!(out, "{t},{},{a}", self.metric.profile.value(*t))?;
        }
        Ok(())
    }
}

fn mass_norm(diag: &[f64], off: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += diag[i] * x[i] * x[i];
        if i + 1 < x.len() {
            acc += 2.0 * off[i] * x[i] * x[i + 1];
        }
    }
    acc
}

fn inverse_iteration(ad: &[f64], ao: &[f64], bd: &[f64], bo: &[f64], mu: f64, constant: bool) -> Vec<f64> {
    let m = ad.len();
    let bnorm = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            acc += bd[i] * x[i] * x[i];
            if i + 1 < m {
                acc += 2.0 * bo[i] * x[i] * x[i + 1];
            }
        }
        acc.sqrt()
    };
    let mut x = if constant {
        vec![1.0; m]
    } else {
        // a shift landing exactly on the eigenvalue makes the solve blow
        // up; nudge it off and retry
        let mut shift = mu;
        loop {
            let shifted_d: Vec<f64> = (0..m).map(|i| ad[i] - shift * bd[i]).collect();
            let shifted_o: Vec<f64> = (0..m.saturating_sub(1)).map(|i| ao[i] - shift * bo[i]).collect();
            // deterministic start with components in every direction
            let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
            for _ in 0..3 {
                let mut rhs = vec![0.0; m];
                for i in 0..m {
                    rhs[i] = bd[i] * x[i];
                    if i > 0 {
                        rhs[i] += bo[i - 1] * x[i - 1];
                    }
                    if i + 1 < m {
                        rhs[i] += bo[i] * x[i + 1];
                    }
                }
                x = tridiag::thomas_solve(&shifted_d, &shifted_o, &rhs);
                let nrm = bnorm(&x);
                x.iter_mut().for_each(|v| *v /= nrm);
            }
            if x.iter().all(|v| v.is_finite()) {
                break x;
            }
            shift -= 1e-9 * mu.abs().max(1.0);
        }
    };
    let nrm = bnorm(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    x
}

/// Eigenpairs of `Λ v = σ diag(w0, w1) v` for symmetric `Λ = [[a, b], [b, d]]`
/// with a separately supplied (cancellation-free) determinant.
fn generalized_2x2(a: f64, d: f64, b: f64, det: f64, w0: f64, w1: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let (s0, s1) = (w0.sqrt(), w1.sqrt());
    let a = a / w0;
    let d = d / w1;
    let b = b / (s0 * s1);
    let det = det / (w0 * w1);
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    let hi = mean + rad;
    let lo = if hi > 0.0 { (det / hi).max(0.0) } else { 0.0 };
    let vector = |mu: f64, fallback: [f64; 2]| -> [f64; 2] {
        let u = [b, mu - a];
        let v = [mu - d, b];
        let nu = u[0].hypot(u[1]);
        let nv = v[0].hypot(v[1]);
        let (y, ny) = if nu >= nv { (u, nu) } else { (v, nv) };
        let y = if ny > 0.0 { [y[0] / ny, y[1] / ny] } else { fallback };
        [y[0] / s0, y[1] / s1]
    };
    let (f_lo, f_hi) = if a <= d { ([1.0, 0.0], [0.0, 1.0]) } else { ([0.0, 1.0], [1.0, 0.0]) };
    ([lo, hi], [vector(lo, f_lo), vector(hi, f_hi)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Family, Profile, ProfileLabel};

    fn product(n: usize, l: f64) -> MetricFamily {
        MetricFamily::new(Family::Conformal, n, Profile::identity(l).unwrap())
    }

    fn collar(delta: f64) -> MetricFamily {
        let p = Profile::identity(delta / 2.0).unwrap();
        MetricFamily::new(Family::Conformal, 1, p)
    }

    #[test]
    fn product_mode_dtn_eigenvalues() {
        let mp = ModeProblem::two_sided(1.0, product(1, 1.0)).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 4000).unwrap();
        let dtn = mp.dtn_matrix(&mesh).unwrap();
        let t = 1f64.tanh();
        assert!((dtn.eigenvalues[0] - t).abs() < 1e-6, "{:?}", dtn.eigenvalues);
        assert!((dtn.eigenvalues[1] - 1.0 / t).abs() < 1e-6, "{:?}", dtn.eigenvalues);
    }

    #[test]
    fn zero_mode_dtn_is_exact() {
        for l in [0.5, 1.0, 3.0] {
            let mp = ModeProblem::two_sided(0.0, product(2, l)).unwrap();
            let mesh = mp.mesh(&MeshControl::default()).unwrap();
            let dtn = mp.dtn_matrix(&mesh).unwrap();
            assert_eq!(dtn.eigenvalues[0], 0.0);
            assert!((dtn.eigenvalues[1] - 1.0 / l).abs() < 1e-13 / l);
        }
    }

    #[test]
    fn steklov_dirichlet_closed_forms() {
        let mp = ModeProblem::steklov_dirichlet(1.0, collar(1.0)).unwrap();
        let mesh = Mesh1D::uniform(-0.5, 0.5, 4000).unwrap();
        let v = mp.steklov_dirichlet_eigenvalue(&mesh).unwrap();
        assert!((v - 1.0 / 1f64.tanh()).abs() < 1e-6, "{v}");
        for delta in [0.1, 0.5, 2.0] {
            let mp = ModeProblem::steklov_dirichlet(0.0, collar(delta)).unwrap();
            let mesh = mp.mesh(&MeshControl::default()).unwrap();
            let v = mp.steklov_dirichlet_eigenvalue(&mesh).unwrap();
            assert!((v - 1.0 / delta).abs() < 1e-12 / delta, "{delta}: {v}");
        }
    }

    #[test]
    fn steklov_dirichlet_requires_mixed_ends() {
        let mp = ModeProblem::two_sided(1.0, product(1, 1.0)).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 10).unwrap();
        assert!(mp.steklov_dirichlet_eigenvalue(&mesh).is_err());
    }

    #[test]
    fn reversed_mixed_problem_matches() {
        let m = collar(1.0);
        let a = ModeProblem::new(2.0, m.clone(), BoundaryCondition::Steklov, BoundaryCondition::Dirichlet).unwrap();
        let b = ModeProblem::new(2.0, m, BoundaryCondition::Dirichlet, BoundaryCondition::Steklov).unwrap();
        let mesh = Mesh1D::uniform(-0.5, 0.5, 300).unwrap();
        let va = a.steklov_dirichlet_eigenvalue(&mesh).unwrap();
        let vb = b.steklov_dirichlet_eigenvalue(&mesh).unwrap();
        assert!((va - vb).abs() < 1e-12 * va);
    }

    #[test]
    fn extension_sinh() {
        let mp = ModeProblem::two_sided(1.0, product(1, 1.0)).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 2000).unwrap();
        let ext = mp.harmonic_extension(&mesh, Some(0.0), Some(1.0)).unwrap();
        assert!(ext.residual <= 1e-12, "{}", ext.residual);
        for (t, a) in mesh.nodes().iter().zip(&ext.values) {
            let exact = (t + 1.0).sinh() / 2f64.sinh();
            assert!((a - exact).abs() < 1e-6, "{t}: {a} vs {exact}");
        }
    }

    #[test]
    fn extension_linear_and_zero() {
        let mp = ModeProblem::two_sided(0.0, product(1, 1.0)).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 64).unwrap();
        let ext = mp.harmonic_extension(&mesh, Some(0.0), Some(1.0)).unwrap();
        for (t, a) in mesh.nodes().iter().zip(&ext.values) {
            assert!((a - (t + 1.0) / 2.0).abs() < 1e-13);
        }
        let mp = ModeProblem::two_sided(3.0, product(1, 1.0)).unwrap();
        let ext = mp.harmonic_extension(&mesh, Some(0.0), Some(0.0)).unwrap();
        assert!(ext.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn extension_errors() {
        let neumann = ModeProblem::new(0.0, product(1, 1.0), BoundaryCondition::Neumann, BoundaryCondition::Neumann).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 8).unwrap();
        assert!(matches!(
            neumann.harmonic_extension(&mesh, None, None),
            Err(Error::ZeroModeNoUniqueExtension)
        ));
        assert!(neumann.harmonic_extension(&mesh, Some(1.0), None).is_err());
        let steklov = ModeProblem::two_sided(1.0, product(1, 1.0)).unwrap();
        assert!(steklov.harmonic_extension(&mesh, Some(1.0), None).is_err());
        let wrong = Mesh1D::uniform(0.0, 1.0, 8).unwrap();
        assert!(steklov.harmonic_extension(&wrong, Some(1.0), Some(0.0)).is_err());
    }

    #[test]
    fn neumann_spectrum_of_unit_interval() {
        let m = collar(1.0);
        let mesh = Mesh1D::uniform(-0.5, 0.5, 2000).unwrap();
        let mp = ModeProblem::new(0.0, m.clone(), BoundaryCondition::Neumann, BoundaryCondition::Neumann).unwrap();
        let vals = mp.neumann_eigenvalues(&mesh, 4).unwrap();
        assert_eq!(vals[0], 0.0);
        for (k, v) in vals.iter().enumerate().skip(1) {
            let exact = (k as f64 * std::f64::consts::PI).powi(2);
            assert!((v - exact).abs() < 1e-4 * exact, "{k}: {v}");
        }
        let shifted = ModeProblem::new(1.0, m, BoundaryCondition::Neumann, BoundaryCondition::Neumann).unwrap();
        let sv = shifted.neumann_eigenvalues(&mesh, 4).unwrap();
        for (a, b) in vals.iter().zip(&sv) {
            assert!((b - a - 1.0).abs() < 1e-9 * b.max(1.0), "{a} {b}");
        }
        assert!(sv.windows(2).all(|w| w[0] <= w[1]));
        assert!(matches!(
            shifted.neumann_eigenvalues(&Mesh1D::uniform(-0.5, 0.5, 3).unwrap(), 5),
            Err(Error::TooManyEigenvalues { .. })
        ));
    }

    #[test]
    fn neumann_rayleigh_consistency() {
        let p = Profile::make(ProfileLabel::Warped, 0.05, 0.4, true).unwrap();
        let m = MetricFamily::new(Family::Warped, 2, p);
        let mp = ModeProblem::new(1.0, m, BoundaryCondition::Neumann, BoundaryCondition::Dirichlet).unwrap();
        let mesh = mp.mesh(&MeshControl::default()).unwrap();
        let asm = mp.assemble(&mesh).unwrap();
        let (md, mo) = mp.mass(&mesh).unwrap();
        let pairs = mp.neumann_eigenpairs(&mesh, 3).unwrap();
        for (mu, v) in pairs.values.iter().zip(&pairs.vectors) {
            let mut mass = 0.0;
            for i in 0..v.len() {
                mass += md[i] * v[i] * v[i];
                if i + 1 < v.len() {
                    mass += 2.0 * mo[i] * v[i] * v[i + 1];
                }
            }
            let rq = asm.energy(v) / mass;
            assert!((rq - mu).abs() <= 1e-10 * mu, "{rq} vs {mu}");
        }
    }

    #[test]
    fn observed_order_is_two() {
        let mp = ModeProblem::two_sided(1.0, product(1, 1.0)).unwrap();
        let exact = 1f64.tanh();
        let errs: Vec<f64> = [20, 40, 80, 160]
            .iter()
            .map(|&n| {
                let mesh = Mesh1D::uniform(-1.0, 1.0, n).unwrap();
                (mp.dtn_matrix(&mesh).unwrap().eigenvalues[0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn dtn_symmetric_psd_and_rayleigh_consistent() {
        let p = Profile::make(ProfileLabel::Warped, 0.0125, 0.4, true).unwrap();
        let m = MetricFamily::new(Family::Warped, 3, p);
        for lambda in [0.0, 1.0, 2.0, 25.0] {
            let mp = ModeProblem::two_sided(lambda, m.clone()).unwrap();
            let mesh = mp.mesh(&MeshControl::default()).unwrap();
            let dtn = mp.dtn_matrix(&mesh).unwrap();
            let norm = dtn.matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((dtn.entry(0, 1) - dtn.entry(1, 0)).abs() <= 1e-12 * norm);
            assert!(dtn.eigenvalues[0] >= -1e-10);
            if lambda == 0.0 {
                continue;
            }
            let asm = mp.assemble(&mesh).unwrap();
            for (sigma, v) in dtn.eigenvalues.iter().zip(&dtn.eigenvectors) {
                let ext = mp.harmonic_extension(&mesh, Some(v[0]), Some(v[1])).unwrap();
                let boundary = dtn.weights[0] * v[0] * v[0] + dtn.weights[1] * v[1] * v[1];
                let rq = asm.energy(&ext.values) / boundary;
                assert!((rq - sigma).abs() <= 1e-10 * sigma, "λ={lambda}: {rq} vs {sigma}");
            }
        }
    }

    #[test]
    fn steklov_dirichlet_monotone_in_depth() {
        for lambda in [0.0, 1.0, 4.0] {
            let mut prev = f64::INFINITY;
            for delta in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
                let mp = ModeProblem::steklov_dirichlet(lambda, collar(delta)).unwrap();
                let mesh = mp.mesh(&MeshControl::default()).unwrap();
                let v = mp.steklov_dirichlet_eigenvalue(&mesh).unwrap();
                assert!(v <= prev && v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn csv_dump() {
        let mp = ModeProblem::two_sided(0.0, product(1, 1.0)).unwrap();
        let mesh = Mesh1D::uniform(-1.0, 1.0, 2).unwrap();
        let ext = mp.harmonic_extension(&mesh, Some(0.0), Some(1.0)).unwrap();
        let mut buf = Vec::new();
        mp.write_csv(&mesh, &ext.values, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,h,a\n-1,1,0\n0,1,0.5\n1,1,1\n");
    }

    #[test]
    fn neumann_lowest_lateral_value_is_exact_lambda() {
        // constant in t: the shift hits the eigenvalue exactly
        let m = MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap());
        for lambda in [1.0, 4.0] {
            let mp = ModeProblem::new(lambda, m.clone(), BoundaryCondition::Neumann, BoundaryCondition::Neumann).unwrap();
            let mesh = mp.mesh(&MeshControl::default()).unwrap();
            let v = mp.neumann_eigenvalues(&mesh, 2).unwrap();
            assert!((v[0] - lambda).abs() < 1e-12, "{v:?}");
            assert!(v[1].is_finite() && v[1] > lambda);
        }
    }
}
