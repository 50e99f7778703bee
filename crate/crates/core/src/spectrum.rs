//! Global spectra of separable cylinders, merged from per-mode solves.
//!
//! Cross-section levels are solved in increasing `λ`. Once at least `k`
//! eigenvalues are known and the smallest per-mode eigenvalue of the latest
//! level exceeds the current `σ_k`, two more levels are solved as a margin
//! and the smallest per-mode eigenvalue of the last level becomes the
//! certified lower bound for everything omitted. That bound relies on the
//! smallest per-mode eigenvalue being nondecreasing in `λ` (the potential
//! `λ h^{α_q}` grows pointwise); the property is checked on every included
//! level and a violation aborts the computation.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_section::{CrossSection, SpectralLevel};
use crate::error::{Error, Result};
use crate::mesh::MeshControl;
use crate::mode::ModeProblem;
use crate::profile::MetricFamily;

/// Relative tolerance for grouping equal eigenvalues in reports.
pub const GROUPING_TOL: f64 = 1e-8;
/// Levels solved past the stopping point.
pub const MARGIN_MODES: usize = 2;
/// Slack allowed in the monotonicity check.
const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Steklov conditions on both ends of the cylinder.
    SteklovTwoSided,
    /// Steklov at the first end, Dirichlet at depth `depth` into the collar.
    SteklovDirichletCollar { depth: f64 },
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::SteklovTwoSided => "steklov",
            ProblemKind::SteklovDirichletCollar { .. } => "steklov-dirichlet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRequest {
    pub cross_section: CrossSection,
    pub metric: MetricFamily,
    pub kind: ProblemKind,
    /// Number `k` of eigenvalues requested (with multiplicity).
    pub count: usize,
    pub mesh: MeshControl,
    /// Report `(4σ_fine - σ_coarse)/3` from the graded mesh and its bisection.
    pub richardson: bool,
    /// Upper limit on the number of distinct cross-section levels solved.
    pub max_levels: usize,
}

impl SpectrumRequest {
    pub fn new(cross_section: CrossSection, metric: MetricFamily, kind: ProblemKind, count: usize) -> Self {
        SpectrumRequest {
            cross_section,
            metric,
            kind,
            count,
            mesh: MeshControl::default(),
            richardson: true,
            max_levels: 20_000,
        }
    }

    pub fn with_mesh(mut self, mesh: MeshControl) -> Self {
        self.mesh = mesh;
        self
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidModeProblem("requested zero eigenvalues".into()));
        }
        if self.cross_section.dimension() != self.metric.n {
            return Err(Error::InvalidModeProblem(format!(
                "cross-section has dimension {} but the metric family expects n = {}",
                self.cross_section.dimension(),
                self.metric.n
            )));
        }
        if let ProblemKind::SteklovDirichletCollar { depth } = self.kind {
            let (a, b) = self.metric.profile.domain();
            if !(depth > 0.0 && depth < b - a) {
                return Err(Error::InvalidModeProblem(format!(
                    "collar depth must lie in (0, {}), got {depth}",
                    b - a
                )));
            }
        }
        Ok(())
    }

    /// The mode problem solved for cross-section eigenvalue `lambda`.
    pub fn mode_problem(&self, lambda: f64) -> Result<ModeProblem> {
        match self.kind {
            ProblemKind::SteklovTwoSided => ModeProblem::two_sided(lambda, self.metric.clone()),
            ProblemKind::SteklovDirichletCollar { depth } => {
                let (a, _) = self.metric.profile.domain();
                let profile = self.metric.profile.restrict(a, a + depth)?;
                let metric = MetricFamily::new(self.metric.family, self.metric.n, profile);
                ModeProblem::steklov_dirichlet(lambda, metric)
            }
        }
    }

    /// Per-mode eigenvalues (ascending) for one level: `(reported, coarse, fine)`.
    pub fn mode_values(&self, lambda: f64) -> Result<Vec<BranchValue>> {
        let mp = self.mode_problem(lambda)?;
        let mesh = mp.mesh(&self.mesh)?;
        let coarse = mp.dtn_matrix(&mesh)?.eigenvalues;
        if !self.richardson {
            return Ok(coarse
                .iter()
                .map(|&v| BranchValue {
                    value: v,
                    coarse: v,
                    fine: v,
                })
                .collect());
        }
        let fine = mp.dtn_matrix(&mesh.bisected())?.eigenvalues;
        Ok(coarse
            .iter()
            .zip(&fine)
            .map(|(&c, &f)| BranchValue {
                value: if c == f { f } else { (4.0 * f - c) / 3.0 },
                coarse: c,
                fine: f,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValue {
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
}

/// Where an eigenvalue comes from: cross-section level and per-mode branch
/// (0 = lower, 1 = upper).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub lambda: f64,
    pub branch: usize,
    /// Multiplicity of `λ` in the cross-section spectrum.
    pub lambda_multiplicity: u64,
    pub raw_coarse: f64,
    pub raw_fine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub sigma: f64,
    pub multiplicity: u64,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub levels_solved: usize,
    /// Largest cross-section eigenvalue included.
    pub lambda_cutoff: f64,
    /// Every omitted eigenvalue is at least this large.
    pub omitted_lower_bound: f64,
    pub margin_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub kind: ProblemKind,
    pub requested: usize,
    /// Eigenvalues below the certified bound, grouped, ascending.
    pub entries: Vec<SpectrumEntry>,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    sigma: f64,
    level: usize,
    branch: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sigma
            .total_cmp(&other.sigma)
            .then(self.level.cmp(&other.level))
            .then(self.branch.cmp(&other.branch))
    }
}

/// k-way merge of per-level ascending lists into `(σ, level, branch)` order.
pub fn merge_sorted(lists: &[Vec<f64>]) -> Vec<(f64, usize, usize)> {
    let mut heap: BinaryHeap<Reverse<Candidate>> = lists
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(level, l)| {
            Reverse(Candidate {
                sigma: l[0],
                level,
                branch: 0,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    while let Some(Reverse(c)) = heap.pop() {
        out.push((c.sigma, c.level, c.branch));
        if let Some(&next) = lists[c.level].get(c.branch + 1) {
            heap.push(Reverse(Candidate {
                sigma: next,
                level: c.level,
                branch: c.branch + 1,
            }));
        }
    }
    out
}

fn same_group(a: f64, b: f64) -> bool {
    (a - b).abs() <= GROUPING_TOL * a.abs().max(b.abs())
}

struct SolvedLevel {
    level: SpectralLevel,
    branches: Vec<BranchValue>,
}

/// Solve `req` and return its first eigenvalues with a truncation certificate.
pub fn steklov_spectrum(req: &SpectrumRequest) -> Result<SpectrumResult> {
    req.validate()?;
    let cs = &req.cross_section;
    let batch = rayon::current_num_threads().clamp(4, 32);
    let mut solved: Vec<SolvedLevel> = Vec::new();
    let mut pending: Vec<SpectralLevel> = Vec::new();
    let mut cutoff = (4.0 * cs.lambda_first_positive()).min(cs.known_up_to());
    let mut enumerated_to = -1.0;
    let mut stop_at: Option<usize> = None;
    loop {
        if let Some(stop) = stop_at {
            if solved.len() >= stop {
                break;
            }
        }
        if pending.is_empty() {
            if enumerated_to >= cs.known_up_to() {
                return Err(Error::Truncation(format!(
                    "cross-section spectrum is only known up to λ = {} and {} levels did not certify σ_{}",
                    cs.known_up_to(),
                    solved.len(),
                    req.count
                )));
            }
            if enumerated_to >= 0.0 {
                cutoff = (cutoff * 4.0).min(cs.known_up_to());
            }
            let levels = cs.eigenvalues_below(cutoff)?;
            pending = levels
                .into_iter()
                .filter(|l| l.lambda > enumerated_to)
                .collect();
            enumerated_to = cutoff;
            pending.reverse();
            continue;
        }
        if solved.len() >= req.max_levels {
            return Err(Error::Truncation(format!(
                "σ_{} not certified within {} cross-section levels",
                req.count, req.max_levels
            )));
        }
        let take = match stop_at {
            Some(stop) => stop - solved.len(),
            None => batch,
        }
        .min(pending.len())
        .min(req.max_levels - solved.len());
        let chunk: Vec<SpectralLevel> = (0..take).filter_map(|_| pending.pop()).collect();
        let results: Vec<Result<Vec<BranchValue>>> = chunk
            .par_iter()
            .map(|l| {
                req.mode_values(l.lambda)
                    .map_err(|e| e.context(format!("solving mode λ = {}", l.lambda)))
            })
            .collect();
        for (level, res) in chunk.into_iter().zip(results) {
            let branches = res?;
            let lowest = branches[0].value;
            if let Some(prev) = solved.last() {
                let prev_low = prev.branches[0].value;
                if lowest < prev_low - MONOTONE_TOL * prev_low.abs() {
                    return Err(Error::Truncation(format!(
                        "smallest per-mode eigenvalue decreased from {prev_low} (λ = {}) to {lowest} (λ = {})",
                        prev.level.lambda, level.lambda
                    )));
                }
            }
            solved.push(SolvedLevel { level, branches });
            if stop_at.is_none() {
                let found: u64 = solved
                    .iter()
                    .map(|s| s.level.multiplicity * s.branches.len() as u64)
                    .sum();
                if found >= req.count as u64 {
                    let sigma_k = kth_value(&solved, req.count);
                    if lowest > sigma_k {
                        stop_at = Some(solved.len() + MARGIN_MODES);
                    }
                }
            }
        }
    }
    let bound = solved.last().map_or(f64::INFINITY, |s| s.branches[0].value);
    let lists: Vec<Vec<f64>> = solved
        .iter()
        .map(|s| s.branches.iter().map(|b| b.value).collect())
        .collect();
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    for (sigma, level, branch) in merge_sorted(&lists) {
        if sigma >= bound {
            break;
        }
        let s = &solved[level];
        let prov = Provenance {
            lambda: s.level.lambda,
            branch,
            lambda_multiplicity: s.level.multiplicity,
            raw_coarse: s.branches[branch].coarse,
            raw_fine: s.branches[branch].fine,
        };
        match entries.last_mut() {
            Some(last) if same_group(last.sigma, sigma) => {
                last.multiplicity += s.level.multiplicity;
                last.provenance.push(prov);
            }
            _ => entries.push(SpectrumEntry {
                sigma,
                multiplicity: s.level.multiplicity,
                provenance: vec![prov],
            }),
        }
    }
    Ok(SpectrumResult {
        kind: req.kind,
        requested: req.count,
        entries,
        certificate: Certificate {
            levels_solved: solved.len(),
            lambda_cutoff: solved.last().map_or(0.0, |s| s.level.lambda),
            omitted_lower_bound: bound,
            margin_levels: MARGIN_MODES,
        },
    })
}

/// Steklov–Dirichlet spectrum of the collar of depth `depth` at the first end.
pub fn steklov_dirichlet_spectrum(req: &SpectrumRequest) -> Result<SpectrumResult> {
    if !matches!(req.kind, ProblemKind::SteklovDirichletCollar { .. }) {
        return Err(Error::InvalidModeProblem("expected a collar problem".into()));
    }
    steklov_spectrum(req)
}

fn kth_value(solved: &[SolvedLevel], k: usize) -> f64 {
    let mut all: Vec<(f64, u64)> = solved
        .iter()
        .flat_map(|s| s.branches.iter().map(move |b| (b.value, s.level.multiplicity)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut count = 0u64;
    for (v, m) in all {
        count += m;
        if count >= k as u64 {
            return v;
        }
    }
    f64::INFINITY
}

impl SpectrumResult {
    /// Number of eigenvalues (with multiplicity) certified complete.
    pub fn available(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity as usize).sum()
    }

    /// `σ_j`, 1-based, counted with multiplicity.
    pub fn sigma_index(&self, j: usize) -> Result<f64> {
        let available = self.available();
        if j == 0 || j > available {
            return Err(Error::IndexOutOfRange { index: j, available });
        }
        let mut count = 0usize;
        for e in &self.entries {
            count += e.multiplicity as usize;
            if count >= j {
                return Ok(e.sigma);
            }
        }
        unreachable!("index checked against the available count")
    }

    /// `σ_1, …, σ_k` with multiplicity.
    pub fn values(&self, k: usize) -> Result<Vec<f64>> {
        (1..=k).map(|j| self.sigma_index(j)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `index,eigenvalue,multiplicity` rows, one per grouped entry.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "index,eigenvalue,multiplicity")?;
        let mut index = 1;
        for e in &self.entries {
            writeln!(out, "{index},{:.15e},{}", e.sigma, e.multiplicity)?;
            index += e.multiplicity as usize;
        }
        Ok(())
    }
}
