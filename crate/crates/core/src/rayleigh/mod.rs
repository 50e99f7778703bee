//! Upper bounds on `σ_k` from explicit test functions and the min-max
//! principle: for a `k`-dimensional span `V`, `σ_j ≤ μ_j(V)` where `μ_j` are
//! the eigenvalues of the energy Gram matrix against the boundary Gram matrix.
//!
//! Two representations are supported. *Mode form* functions are
//! `a(t) φ(x)` with `a` piecewise linear and `φ` an `L²`-normalized
//! cross-section eigenfunction identified by a slot; distinct slots are
//! orthogonal in energy and on the boundary. *Grid form* functions live on a
//! tensor grid over a flat 2-torus and can carry `x`-dependent conformal
//! factors (see [`grid`]).

pub mod grid;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::profile::{Family, MetricFamily};
use crate::quadrature::gauss5_points;
use crate::spectrum::{SpectrumRequest, SpectrumResult};

/// Minimum eigenvalue of the diagonally normalized boundary Gram matrix
/// below which a family is rejected.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Quadrature refinement stops once the bound moves less than this (relative).
pub const REFINE_TOL: f64 = 1e-6;
const MAX_REFINE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// One function per boundary component: constant on the outer half of
    /// its collar of length `L`, linear down to zero on the inner half.
    PsiCollar,
    /// Disjointly supported bumps near one boundary point.
    DisjointBumps,
    Custom,
}

/// `a(t) φ_slot(x)` with `a` piecewise linear on `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTestFunction {
    /// Identifies the cross-section eigenfunction `φ`.
    pub slot: u64,
    /// Its eigenvalue.
    pub lambda: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModeTestFunction {
    pub fn new(slot: u64, lambda: f64, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::DegenerateFamily(
                "a test function needs matching node and value lists of length ≥ 2".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateFamily("test function nodes must increase".into()));
        }
        Ok(ModeTestFunction {
            slot,
            lambda,
            nodes,
            values,
        })
    }

    fn segment(&self, t: f64) -> usize {
        self.nodes
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(self.nodes.len() - 2)
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.segment(t);
        (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub functions: Vec<ModeTestFunction>,
}

/// Pencil eigenvalues of a test family together with a quadrature error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighBound {
    /// `μ_1 ≤ … ≤ μ_k`; `σ_j ≤ μ_j`.
    pub eigenvalues: Vec<f64>,
    /// `μ_k`, the bound on `σ_k`.
    pub bound: f64,
    /// `|μ_k - μ_k(previous quadrature level)|`; `None` when the quadrature
    /// could not be refined.
    pub error_bar: Option<f64>,
}

impl RayleighBound {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The bound on `σ_j` for `j ≤ k`.
    pub fn bound_for(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.k() {
            return Err(Error::IndexOutOfRange {
                index: j,
                available: self.k(),
            });
        }
        Ok(self.eigenvalues[j - 1])
    }
}

/// Ascending eigenvalues of `E v = μ B v` for symmetric `E` and positive
/// definite `B`. Fails when `B` is numerically singular.
pub fn pencil_eigenvalues(energy: &DMatrix<f64>, boundary: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = boundary.nrows();
    let diag: Vec<f64> = (0..k).map(|i| boundary[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateFamily(format!(
            "test function {i} vanishes on the boundary"
        )));
    }
    let scale = DMatrix::from_fn(k, k, |i, j| 1.0 / (diag[i] * diag[j]).sqrt());
    let b = boundary.component_mul(&scale);
    let e = energy.component_mul(&scale);
    let min_b = SymmetricEigen::new(b.clone()).eigenvalues.min();
    if min_b < DEGENERACY_TOL {
        return Err(Error::DegenerateFamily(format!(
            "boundary traces are linearly dependent (normalized Gram eigenvalue {min_b:e})"
        )));
    }
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::DegenerateFamily("boundary Gram matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFamily("singular Cholesky factor".into()))?;
    let c = &l_inv * e * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn check_family(fam: &TestFunctionFamily, metric: &MetricFamily) -> Result<()> {
    if fam.functions.is_empty() {
        return Err(Error::DegenerateFamily("empty test family".into()));
    }
    let (a, b) = metric.profile.domain();
    let tol = 1e-12 * (b - a);
    for (i, f) in fam.functions.iter().enumerate() {
        if f.nodes[0] > a + tol || f.nodes[f.nodes.len() - 1] < b - tol {
            return Err(Error::DegenerateFamily(format!(
                "test function {i} does not cover the interval [{a}, {b}]"
            )));
        }
        if fam.functions.iter().any(|g| g.slot == f.slot && g.lambda != f.lambda) {
            return Err(Error::DegenerateFamily(format!(
                "slot {} is used with two different eigenvalues",
                f.slot
            )));
        }
    }
    Ok(())
}

/// Energy and boundary Gram matrices of a mode-form family; each
/// integration interval is split into `2^level` Gauss panels.
pub fn mode_gram(fam: &TestFunctionFamily, metric: &MetricFamily, level: u32) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = fam.functions.len();
    let (lo, hi) = metric.profile.domain();
    let (ap, aq, _) = metric.exponents();
    let mut energy = DMatrix::zeros(k, k);
    let mut boundary = DMatrix::zeros(k, k);
    let (w0, w1) = (metric.boundary_weight(lo), metric.boundary_weight(hi));
    let panels = 1usize << level;
    for i in 0..k {
        for j in i..k {
            let (f, g) = (&fam.functions[i], &fam.functions[j]);
            if f.slot != g.slot {
                continue;
            }
            let mut breaks: Vec<f64> = metric.profile.junctions();
            breaks.extend(f.nodes.iter().chain(&g.nodes).filter(|&&t| t > lo && t < hi));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let mut e = 0.0;
            for w in breaks.windows(2) {
                let width = (w[1] - w[0]) / panels as f64;
                for p in 0..panels {
                    let a = w[0] + width * p as f64;
                    for (t, wt) in gauss5_points(a, a + width) {
                        let h = metric.profile.value(t);
                        e += wt
                            * (h.powi(ap) * f.derivative(t) * g.derivative(t)
                                + f.lambda * h.powi(aq) * f.value(t) * g.value(t));
                    }
                }
            }
            let b = w0 * f.value(lo) * g.value(lo) + w1 * f.value(hi) * g.value(hi);
            energy[(i, j)] = e;
            energy[(j, i)] = e;
            boundary[(i, j)] = b;
            boundary[(j, i)] = b;
        }
    }
    (energy, boundary)
}

/// Min-max upper bounds from a mode-form family, with Gauss panels refined
/// until `μ_k` changes by less than [`REFINE_TOL`] (relative).
pub fn minmax_upper_bound(fam: &TestFunctionFamily, metric: &MetricFamily) -> Result<RayleighBound> {
    check_family(fam, metric)?;
    let (e, b) = mode_gram(fam, metric, 0);
    let mut prev = pencil_eigenvalues(&e, &b)?;
    for level in 1..=MAX_REFINE {
        let (e, b) = mode_gram(fam, metric, level);
        let vals = pencil_eigenvalues(&e, &b)?;
        let (old, new) = (prev[prev.len() - 1], vals[vals.len() - 1]);
        let change = (new - old).abs();
        prev = vals;
        if change <= REFINE_TOL * new.abs() || change == 0.0 {
            return Ok(RayleighBound {
                bound: new,
                eigenvalues: prev,
                error_bar: Some(change),
            });
        }
    }
    let bound = prev[prev.len() - 1];
    log::warn!("mode-form quadrature did not settle to {REFINE_TOL:e}");
    Ok(RayleighBound {
        bound,
        eigenvalues: prev,
        error_bar: None,
    })
}

/// The collar test functions: for every boundary component, constant on
/// the half of its collar `[0, L/2]` next to the boundary and linear down to
/// zero at depth `L`. With `h = 1` on the inner halves `[L/2, 3L/2]` of the
/// cylinder (collar coordinate) the bound is `2/L` whatever `h` does near
/// the boundary.
pub fn psi_family(metric: &MetricFamily, cs: &CrossSection) -> Result<TestFunctionFamily> {
    let (a, b) = metric.profile.domain();
    let l = 0.5 * (b - a);
    let nodes = vec![a, a + 0.5 * l, a + l, b - 0.5 * l, b];
    let mut functions = Vec::new();
    for j in 0..cs.component_count() {
        // the normalized constant eigenfunction of component j already
        // carries |Σ_j|^{-1/2}, so the profile in t is the bare shape
        functions.push(ModeTestFunction::new(j as u64, 0.0, nodes.clone(), vec![1.0, 1.0, 0.0, 0.0, 0.0])?);
        functions.push(ModeTestFunction::new(j as u64, 0.0, nodes.clone(), vec![0.0, 0.0, 0.0, 1.0, 1.0])?);
    }
    Ok(TestFunctionFamily {
        kind: FamilyKind::PsiCollar,
        functions,
    })
}

/// Whether `metric` satisfies the collar hypothesis behind [`psi_family`]'s
/// exact value `2/L`: `h = 1` at the boundary and on the inner halves.
pub fn psi_hypothesis_holds(metric: &MetricFamily) -> bool {
    let (a, b) = metric.profile.domain();
    let l = 0.5 * (b - a);
    metric.profile.is_one_on(a + 0.5 * l, b - 0.5 * l)
        && metric.profile.value(a) == 1.0
        && metric.profile.value(b) == 1.0
}

/// A single constant function; its bound is `0`.
pub fn constant_family(metric: &MetricFamily) -> Result<TestFunctionFamily> {
    let (a, b) = metric.profile.domain();
    Ok(TestFunctionFamily {
        kind: FamilyKind::Custom,
        functions: vec![ModeTestFunction::new(0, 0.0, vec![a, b], vec![1.0, 1.0])?],
    })
}

/// Harmonic extensions of the per-mode eigenvectors behind the first
/// `count` eigenvalues of a computed spectrum (on the coarse mesh). Each
/// copy of a repeated cross-section eigenvalue gets its own slot.
pub fn extension_family(req: &SpectrumRequest, result: &SpectrumResult, count: usize) -> Result<TestFunctionFamily> {
    let mut functions = Vec::new();
    let mut slot = 0u64;
    'outer: for entry in &result.entries {
        for prov in &entry.provenance {
            let mp = req.mode_problem(prov.lambda)?;
            let mesh = mp.mesh(&req.mesh)?;
            let dtn = mp.dtn_matrix(&mesh)?;
            let v = &dtn.eigenvectors[prov.branch];
            let (left, right) = match (dtn.size(), mp.right) {
                (2, _) => (Some(v[0]), Some(v[1])),
                (_, crate::mode::BoundaryCondition::Steklov) => (None, Some(v[0])),
                _ => (Some(v[0]), None),
            };
            let ext = mp.harmonic_extension(&mesh, left, right)?;
            let (a, b) = mp.interval();
            let mut nodes = mesh.nodes().to_vec();
            let mut values = ext.values;
            // collar problems: extend by zero past the Dirichlet end
            let (_, full_end) = req.metric.profile.domain();
            if b < full_end {
                nodes.push(full_end);
                values.push(0.0);
            }
            debug_assert!(nodes[0] == a);
            for _ in 0..prov.lambda_multiplicity {
                functions.push(ModeTestFunction::new(slot, prov.lambda, nodes.clone(), values.clone())?);
                slot += 1;
                if functions.len() == count {
                    break 'outer;
                }
            }
        }
    }
    Ok(TestFunctionFamily {
        kind: FamilyKind::Custom,
        functions,
    })
}

/// Kokarev's bound `σ_2 ≤ 8π / |∂M|` for genus-0 surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KokarevReport {
    pub sigma2: f64,
    pub boundary_length: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn kokarev_check(result: &SpectrumResult, boundary_length: f64, n: usize) -> Result<KokarevReport> {
    if n != 1 {
        return Err(Error::NotApplicable(format!(
            "the surface bound needs a one-dimensional cross-section, got n = {n}"
        )));
    }
    let sigma2 = result.sigma_index(2)?;
    let bound = 8.0 * std::f64::consts::PI / boundary_length;
    let slack = bound - sigma2;
    Ok(KokarevReport {
        sigma2,
        boundary_length,
        bound,
        slack,
        pass: slack >= -1e-8 * bound,
    })
}

/// Boundary length of a surface cylinder `Σ × I` with `n = 1`.
pub fn surface_boundary_length(metric: &MetricFamily, cs: &CrossSection) -> Result<f64> {
    if metric.n != 1 || metric.family != Family::Conformal && metric.family != Family::Warped {
        return Err(Error::NotApplicable("boundary length is defined for n = 1".into()));
    }
    Ok(metric.boundary_measure(cs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSectionComponent;
    use crate::profile::{Profile, ProfileLabel};
    use crate::spectrum::{steklov_spectrum, ProblemKind};
    use std::f64::consts::PI;

    fn torus() -> CrossSectionComponent {
        CrossSectionComponent::flat_torus(&[2.0 * PI, 2.0 * PI]).unwrap()
    }

    #[test]
    fn constant_gives_zero() {
        let m = MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap());
        let b = minmax_upper_bound(&constant_family(&m).unwrap(), &m).unwrap();
        assert_eq!(b.bound, 0.0);
    }

    #[test]
    fn psi_bound_is_two_over_l() {
        let t = torus();
        let pair = CrossSection::new(vec![t.clone(), t]).unwrap();
        for (label, eps) in [
            (ProfileLabel::Conf1, 0.1),
            (ProfileLabel::Conf1, 0.0125),
            (ProfileLabel::Identity, 1.0),
        ] {
            for l in [1.0, 2.0] {
                let p = if label == ProfileLabel::Identity {
                    Profile::identity(l).unwrap()
                } else {
                    Profile::make(label, eps, l, false).unwrap()
                };
                let m = MetricFamily::new(Family::Conformal, 2, p);
                assert!(psi_hypothesis_holds(&m));
                let fam = psi_family(&m, &pair).unwrap();
                assert_eq!(fam.functions.len(), 4);
                let b = minmax_upper_bound(&fam, &m).unwrap();
                assert!((b.bound - 2.0 / l).abs() <= 1e-8, "{label} L={l}: {}", b.bound);
            }
        }
    }

    #[test]
    fn psi_hypothesis_fails_for_conf2() {
        let p = Profile::make(ProfileLabel::Conf2, 0.1, 1.0, true).unwrap();
        let m = MetricFamily::new(Family::Conformal, 2, p);
        assert!(!psi_hypothesis_holds(&m));
        let b = minmax_upper_bound(&psi_family(&m, &CrossSection::single(torus())).unwrap(), &m).unwrap();
        assert!(b.bound > 2.0);
    }

    #[test]
    fn degenerate_family_rejected() {
        let m = MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap());
        let f = ModeTestFunction::new(0, 0.0, vec![-1.0, 1.0], vec![1.0, 2.0]).unwrap();
        let g = ModeTestFunction::new(0, 0.0, vec![-1.0, 1.0], vec![2.0, 4.0]).unwrap();
        let fam = TestFunctionFamily {
            kind: FamilyKind::Custom,
            functions: vec![f, g],
        };
        assert!(matches!(minmax_upper_bound(&fam, &m), Err(Error::DegenerateFamily(_))));
        let inner = ModeTestFunction::new(0, 0.0, vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let fam = TestFunctionFamily {
            kind: FamilyKind::Custom,
            functions: vec![inner],
        };
        assert!(matches!(minmax_upper_bound(&fam, &m), Err(Error::DegenerateFamily(_))));
    }

    #[test]
    fn bounds_dominate_computed_spectrum() {
        let cs = CrossSection::single(torus());
        for (family, label, eps, l) in [
            (Family::Warped, ProfileLabel::Warped, 0.05, 0.4),
            (Family::Conformal, ProfileLabel::Conf1, 0.05, 1.0),
            (Family::Conformal, ProfileLabel::Conf2, 0.05, 1.0),
        ] {
            let p = Profile::make(label, eps, l, true).unwrap();
            let m = MetricFamily::new(family, 2, p);
            let req = SpectrumRequest::new(cs.clone(), m.clone(), ProblemKind::SteklovTwoSided, 8);
            let res = steklov_spectrum(&req).unwrap();
            let fam = extension_family(&req, &res, 8).unwrap();
            let bound = minmax_upper_bound(&fam, &m).unwrap();
            for j in 1..=8 {
                let s = res.sigma_index(j).unwrap();
                let mu = bound.bound_for(j).unwrap();
                assert!(mu >= s * (1.0 - 1e-8) - 1e-12, "{label} j={j}: μ={mu} < σ={s}");
                // consistent with the coarse discrete value
                assert!(mu <= s * 1.05 + 1e-9, "{label} j={j}: μ={mu} far above σ={s}");
            }
            let psi = minmax_upper_bound(&psi_family(&m, &cs).unwrap(), &m).unwrap();
            assert!(psi.bound >= res.sigma_index(2).unwrap() * (1.0 - 1e-8));
        }
    }

    #[test]
    fn kokarev_on_product_circle() {
        let cs = CrossSection::single(CrossSectionComponent::circle(1.0).unwrap());
        for l in [1.0, 100.0] {
            let m = MetricFamily::new(Family::Conformal, 1, Profile::identity(l).unwrap());
            let res = steklov_spectrum(&SpectrumRequest::new(cs.clone(), m.clone(), ProblemKind::SteklovTwoSided, 2)).unwrap();
            let len = surface_boundary_length(&m, &cs).unwrap();
            assert!((len - 4.0 * PI).abs() < 1e-12);
            let rep = kokarev_check(&res, len, 1).unwrap();
            assert!(rep.pass);
            assert!((rep.bound - 2.0).abs() < 1e-12);
            let expected = if l == 1.0 { 1f64.tanh() } else { 0.01 };
            assert!((rep.sigma2 - expected).abs() < 1e-6, "{}", rep.sigma2);
        }
        let t = MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap());
        let res = steklov_spectrum(&SpectrumRequest::new(CrossSection::single(torus()), t, ProblemKind::SteklovTwoSided, 2)).unwrap();
        assert!(matches!(kokarev_check(&res, 1.0, 2), Err(Error::NotApplicable(_))));
    }
}
