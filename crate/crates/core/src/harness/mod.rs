//! Scenario-driven verification: a TOML scenario fixes a cross-section, a
//! metric family and an ε grid; the harness sweeps the grid, runs the
//! requested eigenvalue inequalities against the computed spectra and
//! writes CSV, JSON and SVG artifacts.

mod checks;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_section::{CrossSection, CrossSectionComponent};
use crate::error::{Error, Result};
use crate::mesh::MeshControl;
use crate::profile::{Family, MetricFamily, Piece, Profile, ProfileLabel};
use crate::spectrum::{steklov_spectrum, Certificate, ProblemKind, SpectrumRequest};

pub use checks::{neumann_gap, run_check};
pub use report::{write_atomic, CheckReport, CheckRow, Constant, ScenarioReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    /// `σ_{b+1} ≥ A/ε` for the collar-supported conformal profile.
    Conf1,
    /// `σ_2 ≥ C/ε` for the conformal profile supported everywhere.
    Conf2,
    /// `σ_2 ≥ C/ε` for warped products.
    Warped,
    /// `σ_b ≤ 2/L` and the collar test-function bound.
    PsiUpperBound,
    /// Eigenvalue ratios under a quasi-isometric change of profile.
    QuasiIso,
    /// `σ_2 ≤ 8π / |∂M|` on surfaces.
    Kokarev,
    /// `σ_2 ≤ 2Lλ_2` for `n = 2` warped products, exceeded for `n ≥ 3`.
    N2Bound,
    VolumeGrowth,
    NeumannPoincare,
    CollarDomination,
    SmallEigenvalues,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Conf1 => "conf1",
            CheckName::Conf2 => "conf2",
            CheckName::Warped => "warped",
            CheckName::PsiUpperBound => "psi-upper-bound",
            CheckName::QuasiIso => "quasi-iso",
            CheckName::Kokarev => "kokarev",
            CheckName::N2Bound => "n2-bound",
            CheckName::VolumeGrowth => "volume-growth",
            CheckName::NeumannPoincare => "neumann-poincare",
            CheckName::CollarDomination => "collar-domination",
            CheckName::SmallEigenvalues => "small-eigenvalues",
        }
    }
}

impl std::fmt::Display for CheckName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComponentConfig {
    Circle { radius: f64 },
    FlatTorus { periods: Vec<f64> },
    RoundSphere { dimension: usize, radius: f64 },
    /// Explicit `[eigenvalue, multiplicity]` levels.
    Custom { dimension: usize, volume: f64, levels: Vec<(f64, u64)> },
    /// Levels read from a two-column text file, relative to the scenario.
    CustomFile { path: PathBuf, dimension: usize, volume: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionConfig {
    pub components: Vec<ComponentConfig>,
    #[serde(default)]
    pub enumeration_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub family: Family,
    pub profile: ProfileLabel,
    /// Cross-section dimension; defaults to that of the cross-section.
    #[serde(default)]
    pub n: Option<usize>,
    pub half_length: f64,
    pub epsilons: Vec<f64>,
    /// Enforce the admissible ε range of the profile family.
    #[serde(default)]
    pub strict_epsilon: bool,
    /// Piece list for `profile = "custom"`.
    #[serde(default)]
    pub pieces: Option<Vec<Piece>>,
}

fn default_count() -> usize {
    10
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Eigenvalues per sweep point (raised to what the checks need).
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "yes")]
    pub richardson: bool,
    #[serde(default)]
    pub mesh: MeshControl,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            count: default_count(),
            richardson: true,
            mesh: MeshControl::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallEigenvaluesConfig {
    pub m: Vec<f64>,
    pub ball_radius: f64,
    pub bumps: usize,
    pub resolution: usize,
    pub bump_elements: usize,
    /// Grid refinements; the last change is reported as the error bar.
    pub refinements: u32,
    /// Bounds at the last `m` must fall below this.
    pub below: f64,
}

impl Default for SmallEigenvaluesConfig {
    fn default() -> Self {
        SmallEigenvaluesConfig {
            m: vec![10.0, 100.0, 1000.0],
            ball_radius: 3.0,
            bumps: 3,
            resolution: 128,
            bump_elements: 40,
            refinements: 1,
            below: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub run: Vec<CheckName>,
    /// Collar depth `δ`; defaults to each sweep point's ε.
    pub collar_depth: Option<f64>,
    /// Largest index `k` for the ratio and collar checks.
    pub max_index: usize,
    /// Pointwise metric ratio for the quasi-isometry check.
    pub quasi_ratio: f64,
    /// Volume at the smallest ε over the product volume.
    pub min_volume_ratio: f64,
    pub neumann_trials: usize,
    pub small_eigenvalues: SmallEigenvaluesConfig,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            run: Vec::new(),
            collar_depth: None,
            max_index: 10,
            quasi_ratio: 1.2,
            min_volume_ratio: 10.0,
            neumann_trials: 100,
            small_eigenvalues: SmallEigenvaluesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory, relative to the scenario file; nothing is
    /// written when absent.
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            csv: true,
            json: true,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub cross_section: CrossSectionConfig,
    pub metric: MetricConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "scenario".into());
            Error::Config {
                field,
                reason: e.to_string().trim().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        let mut scenario = Scenario::from_toml(&text)?;
        scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        // custom files resolve against the scenario directory
        scenario.cross_section()?;
        Ok(scenario)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        let mut comps = Vec::new();
        for (i, c) in self.cross_section.components.iter().enumerate() {
            let field = format!("cross_section.components[{i}]");
            let comp = match c {
                ComponentConfig::Circle { radius } => CrossSectionComponent::circle(*radius),
                ComponentConfig::FlatTorus { periods } => CrossSectionComponent::flat_torus(periods),
                ComponentConfig::RoundSphere { dimension, radius } => CrossSectionComponent::round_sphere(*dimension, *radius),
                ComponentConfig::Custom { dimension, volume, levels } => {
                    CrossSectionComponent::custom(*dimension, *volume, levels.clone())
                }
                ComponentConfig::CustomFile { path, dimension, volume } => {
                    CrossSectionComponent::load_custom(&self.resolve(path), *dimension, *volume)
                }
            }
            .map_err(|e| Error::config(field, e.to_string()))?;
            comps.push(comp);
        }
        let mut cs = CrossSection::new(comps).map_err(|e| Error::config("cross_section.components", e.to_string()))?;
        if let Some(cap) = self.cross_section.enumeration_cap {
            cs = cs.with_enumeration_cap(cap);
        }
        Ok(cs)
    }

    fn dimension(&self) -> Result<usize> {
        let comps = &self.cross_section.components;
        let first = comps
            .first()
            .ok_or_else(|| Error::config("cross_section.components", "at least one component is required"))?;
        Ok(match first {
            ComponentConfig::Circle { .. } => 1,
            ComponentConfig::FlatTorus { periods } => periods.len(),
            ComponentConfig::RoundSphere { dimension, .. }
            | ComponentConfig::Custom { dimension, .. }
            | ComponentConfig::CustomFile { dimension, .. } => *dimension,
        })
    }

    pub fn n(&self) -> Result<usize> {
        let d = self.dimension()?;
        match self.metric.n {
            Some(n) if n != d => Err(Error::config(
                "metric.n",
                format!("cross-section has dimension {d}, not {n}"),
            )),
            _ => Ok(d),
        }
    }

    /// Periods of the cross-section when it is a single flat 2-torus.
    pub fn torus_periods(&self) -> Option<[f64; 2]> {
        match self.cross_section.components.as_slice() {
            [ComponentConfig::FlatTorus { periods }] if periods.len() == 2 => Some([periods[0], periods[1]]),
            _ => None,
        }
    }

    /// Check field ranges and that every requested check applies.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        let n = self.n()?;
        let m = &self.metric;
        if !(m.half_length > 0.0 && m.half_length.is_finite()) {
            return Err(Error::config("metric.half_length", "must be positive"));
        }
        if m.epsilons.is_empty() {
            return Err(Error::config("metric.epsilons", "at least one ε is required"));
        }
        if let Some(e) = m.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::config("metric.epsilons", format!("ε must be positive, got {e}")));
        }
        if (m.profile == ProfileLabel::Custom) != m.pieces.is_some() {
            return Err(Error::config("metric.pieces", "required exactly when profile = \"custom\""));
        }
        if self.solve.count == 0 {
            return Err(Error::config("solve.count", "must be at least 1"));
        }
        let c = &self.checks;
        if c.max_index == 0 {
            return Err(Error::config("checks.max_index", "must be at least 1"));
        }
        if !(c.quasi_ratio >= 1.0 && c.quasi_ratio.is_finite()) {
            return Err(Error::config("checks.quasi_ratio", "must be ≥ 1"));
        }
        if !(c.min_volume_ratio >= 1.0 && c.min_volume_ratio.is_finite()) {
            return Err(Error::config("checks.min_volume_ratio", "must be ≥ 1"));
        }
        if let Some(d) = c.collar_depth {
            if !(d > 0.0 && d < 2.0 * m.half_length) {
                return Err(Error::config("checks.collar_depth", "must lie in (0, 2L)"));
            }
        }
        let se = &c.small_eigenvalues;
        if se.m.iter().any(|m| !(*m >= 1.0 && m.is_finite())) {
            return Err(Error::config("checks.small_eigenvalues.m", "scale parameters must be ≥ 1"));
        }
        if !(se.below > 0.0) {
            return Err(Error::config("checks.small_eigenvalues.below", "must be positive"));
        }
        for check in &c.run {
            let reason = match check {
                CheckName::Conf1 | CheckName::Conf2 if m.family != Family::Conformal => {
                    Some("needs the conformal family".to_string())
                }
                CheckName::Conf1 | CheckName::Conf2 if n < 2 => Some("needs n ≥ 2 (dimension at least 3)".into()),
                CheckName::Warped | CheckName::N2Bound if m.family != Family::Warped => {
                    Some("needs the warped family".into())
                }
                CheckName::N2Bound if n < 2 => Some("needs n ≥ 2".into()),
                CheckName::Kokarev if n != 1 => Some(format!("needs n = 1, got n = {n}")),
                CheckName::NeumannPoincare | CheckName::SmallEigenvalues if self.torus_periods().is_none() => {
                    Some("needs a single flat 2-torus cross-section".into())
                }
                CheckName::NeumannPoincare if c.neumann_trials == 0 => Some("checks.neumann_trials must be positive".into()),
                CheckName::SmallEigenvalues if c.small_eigenvalues.m.len() < 2 => {
                    Some("checks.small_eigenvalues.m needs at least two values".into())
                }
                _ => None,
            };
            if let Some(reason) = reason {
                return Err(Error::config("checks.run", format!("{check}: {reason}")));
            }
        }
        Ok(())
    }

    pub fn profile(&self, epsilon: f64) -> Result<Profile> {
        let m = &self.metric;
        match (&m.pieces, m.profile) {
            (Some(pieces), ProfileLabel::Custom) => Profile::custom(pieces.clone(), epsilon),
            _ => Profile::make(m.profile, epsilon, m.half_length, m.strict_epsilon),
        }
    }

    pub fn metric(&self, epsilon: f64) -> Result<MetricFamily> {
        Ok(MetricFamily::new(self.metric.family, self.n()?, self.profile(epsilon)?))
    }

    /// Number of boundary components of the two-sided cylinder.
    pub fn boundary_components(&self) -> usize {
        2 * self.cross_section.components.len()
    }

    /// Eigenvalues solved per sweep point.
    pub fn count(&self) -> usize {
        let b = self.boundary_components();
        let mut k = self.solve.count;
        for check in &self.checks.run {
            k = k.max(match check {
                CheckName::Conf1 => b + 1,
                CheckName::PsiUpperBound => b,
                CheckName::QuasiIso | CheckName::CollarDomination => self.checks.max_index,
                _ => 2,
            });
        }
        k
    }

    pub fn request(&self, epsilon: f64, cs: &CrossSection, kind: ProblemKind, count: usize) -> Result<SpectrumRequest> {
        Ok(SpectrumRequest::new(cs.clone(), self.metric(epsilon)?, kind, count)
            .with_mesh(self.solve.mesh)
            .with_richardson(self.solve.richardson))
    }

    /// ε values in decreasing order.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut e = self.metric.epsilons.clone();
        e.sort_by(|a, b| b.total_cmp(a));
        e.dedup();
        e
    }
}

/// Spectrum and geometry of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `σ_1 ≤ … ≤ σ_k` with multiplicity.
    pub sigma: Vec<f64>,
    pub volume: f64,
    pub boundary_distance: f64,
    pub boundary_measure: f64,
    pub certificate: Certificate,
}

/// Solve the two-sided Steklov problem at every ε of the scenario, in
/// parallel over sweep points.
pub fn sweep(scenario: &Scenario) -> Result<Vec<SweepPoint>> {
    let cs = scenario.cross_section()?;
    let count = scenario.count();
    scenario
        .epsilons()
        .par_iter()
        .map(|&eps| {
            let req = scenario.request(eps, &cs, ProblemKind::SteklovTwoSided, count)?;
            let res = steklov_spectrum(&req).map_err(|e| e.context(format!("scenario {} at ε = {eps}", scenario.name)))?;
            Ok(SweepPoint {
                epsilon: eps,
                sigma: res.values(count)?,
                volume: req.metric.volume(&cs),
                boundary_distance: req.metric.boundary_distance(),
                boundary_measure: req.metric.boundary_measure(&cs),
                certificate: res.certificate,
            })
        })
        .collect()
}

/// Sweep, run every requested check and write the configured artifacts.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport> {
    scenario.validate()?;
    let points = sweep(scenario)?;
    let mut reports = Vec::new();
    for &check in &scenario.checks.run {
        let rep = run_check(check, scenario, &points).map_err(|e| e.context(format!("check {check}")))?;
        log::info!("{}: {}", check, if rep.pass { "pass" } else { "FAIL" });
        reports.push(rep);
    }
    let pass = reports.iter().all(|r| r.pass);
    let report = ScenarioReport {
        scenario: scenario.name.clone(),
        family: scenario.metric.family,
        profile: scenario.metric.profile,
        n: scenario.n()?,
        half_length: scenario.metric.half_length,
        sweep: points,
        checks: reports,
        pass,
    };
    if let Some(dir) = &scenario.output.dir {
        report.write_artifacts(&scenario.resolve(dir), &scenario.output)?;
    }
    Ok(report)
}
