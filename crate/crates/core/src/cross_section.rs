//! Laplace spectra and volumes of closed cross-sections.
//!
//! Only kinds with closed-form spectra are supported (circles, rectangular
//! flat tori of any dimension, round spheres), plus explicit finite lists.
//! A cross-section may be disconnected; each component contributes one zero
//! eigenvalue.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total multiplicity returned by one enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

/// Two eigenvalues closer than this (relative to `max(1, λ)`) are merged.
pub const DEDUP_TOL: f64 = 1e-12;

fn same_eigenvalue(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEDUP_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComponentKind {
    Circle {
        radius: f64,
    },
    FlatTorus {
        periods: Vec<f64>,
    },
    RoundSphere {
        dimension: usize,
        radius: f64,
    },
    /// Explicit `(eigenvalue, multiplicity)` levels, complete up to the last
    /// listed eigenvalue.
    Custom {
        dimension: usize,
        volume: f64,
        levels: Vec<(f64, u64)>,
    },
}

/// Strategy used to enumerate flat-torus lattice eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Enumeration {
    /// Walk the whole bounding box of the lattice ball, then sort.
    LatticeWalk,
    /// Grow outward from the origin with a min-heap, emitting in order.
    #[default]
    SortedHeap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionComponent {
    kind: ComponentKind,
    volume: f64,
    dimension: usize,
}

impl CrossSectionComponent {
    pub fn new(kind: ComponentKind) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidCrossSection(msg));
        let (volume, dimension) = match &kind {
            ComponentKind::Circle { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("circle radius must be positive, got {radius}"));
                }
                (2.0 * PI * radius, 1)
            }
            ComponentKind::FlatTorus { periods } => {
                if periods.is_empty() {
                    return bad("flat torus needs at least one period".into());
                }
                if let Some(p) = periods.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
                    return bad(format!("torus periods must be positive, got {p}"));
                }
                (periods.iter().product(), periods.len())
            }
            ComponentKind::RoundSphere { dimension, radius } => {
                if *dimension == 0 {
                    return bad("sphere dimension must be at least 1".into());
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("sphere radius must be positive, got {radius}"));
                }
                (sphere_volume(*dimension, *radius), *dimension)
            }
            ComponentKind::Custom {
                dimension,
                volume,
                levels,
            } => {
                if *dimension == 0 {
                    return bad("custom component dimension must be at least 1".into());
                }
                if !(*volume > 0.0 && volume.is_finite()) {
                    return bad(format!("custom component volume must be positive, got {volume}"));
                }
                validate_levels(levels)?;
                (*volume, *dimension)
            }
        };
        Ok(Self {
            kind,
            volume,
            dimension,
        })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(ComponentKind::Circle { radius })
    }

    pub fn flat_torus(periods: &[f64]) -> Result<Self> {
        Self::new(ComponentKind::FlatTorus {
            periods: periods.to_vec(),
        })
    }

    pub fn round_sphere(dimension: usize, radius: f64) -> Result<Self> {
        Self::new(ComponentKind::RoundSphere { dimension, radius })
    }

    pub fn custom(dimension: usize, volume: f64, levels: Vec<(f64, u64)>) -> Result<Self> {
        Self::new(ComponentKind::Custom {
            dimension,
            volume,
            levels,
        })
    }

    /// Load a custom spectrum from a two-column text file
    /// (`eigenvalue multiplicity` per line, `#` starts a comment).
    pub fn load_custom(path: &Path, dimension: usize, volume: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let levels = parse_levels(&text)
            .map_err(|e| e.context(format!("reading custom spectrum {}", path.display())))?;
        Self::custom(dimension, volume, levels)
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Largest eigenvalue this component can enumerate exhaustively.
    pub fn known_up_to(&self) -> f64 {
        match &self.kind {
            ComponentKind::Custom { levels, .. } => levels.last().map_or(0.0, |l| l.0),
            _ => f64::INFINITY,
        }
    }

    /// Sorted `(λ, multiplicity)` pairs with `λ ≤ cutoff`.
    pub fn eigenvalues_below(
        &self,
        cutoff: f64,
        cap: usize,
        strategy: Enumeration,
    ) -> Result<Vec<(f64, u64)>> {
        if cutoff.is_nan() || cutoff < 0.0 {
            return Err(Error::InvalidCrossSection(format!(
                "cutoff must be nonnegative, got {cutoff}"
            )));
        }
        if cutoff > self.known_up_to() {
            return Err(Error::InvalidCrossSection(format!(
                "custom spectrum is only known up to {}, cutoff {cutoff} requested",
                self.known_up_to()
            )));
        }
        let raw = match &self.kind {
            ComponentKind::Circle { radius } => {
                let kmax = (radius * cutoff.sqrt()).floor() as u64;
                check_cap(2 * kmax as usize + 1, cutoff, cap)?;
                (0..=kmax)
                    .map(|k| {
                        let kr = k as f64 / radius;
                        (kr * kr, if k == 0 { 1 } else { 2 })
                    })
                    .filter(|(l, _)| *l <= cutoff)
                    .collect()
            }
            ComponentKind::FlatTorus { periods } => match strategy {
                Enumeration::LatticeWalk => torus_lattice_walk(periods, cutoff, cap)?,
                Enumeration::SortedHeap => torus_sorted_heap(periods, cutoff, cap)?,
            },
            ComponentKind::RoundSphere { dimension, radius } => {
                let mut out = Vec::new();
                let mut total = 0usize;
                for l in 0u64.. {
                    let lambda = (l * (l + *dimension as u64 - 1)) as f64 / (radius * radius);
                    if lambda > cutoff {
                        break;
                    }
                    let mult = sphere_multiplicity(*dimension as u64, l);
                    total = total.saturating_add(mult as usize);
                    check_cap(total, cutoff, cap)?;
                    out.push((lambda, mult));
                }
                out
            }
            ComponentKind::Custom { levels, .. } => {
                let out: Vec<_> = levels.iter().copied().filter(|l| l.0 <= cutoff).collect();
                check_cap(out.iter().map(|l| l.1 as usize).sum(), cutoff, cap)?;
                out
            }
        };
        Ok(aggregate(raw))
    }
}

fn check_cap(count: usize, cutoff: f64, cap: usize) -> Result<()> {
    if count > cap {
        Err(Error::EnumerationCap { cutoff, cap })
    } else {
        Ok(())
    }
}

fn validate_levels(levels: &[(f64, u64)]) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidCrossSection(msg));
    match levels.first() {
        Some(&(0.0, 1)) => {}
        Some(&(l, m)) => {
            return bad(format!(
                "custom spectrum must start with eigenvalue 0 of multiplicity 1, got ({l}, {m})"
            ))
        }
        None => return bad("custom spectrum is empty".into()),
    }
    if levels.len() < 2 {
        return bad("custom spectrum needs at least one positive eigenvalue".into());
    }
    for w in levels.windows(2) {
        if !(w[1].0 > w[0].0) || !w[1].0.is_finite() {
            return bad(format!(
                "custom eigenvalues must be strictly increasing and finite ({} then {})",
                w[0].0, w[1].0
            ));
        }
    }
    if let Some(l) = levels.iter().find(|l| l.1 == 0) {
        return bad(format!("multiplicity of {} must be at least 1", l.0));
    }
    Ok(())
}

/// Parse a two-column `eigenvalue multiplicity` listing.
pub fn parse_levels(text: &str) -> Result<Vec<(f64, u64)>> {
    let mut levels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let err = || {
            Error::InvalidCrossSection(format!(
                "line {}: expected `eigenvalue multiplicity`, got `{line}`",
                lineno + 1
            ))
        };
        if cols.len() != 2 {
            return Err(err());
        }
        let lambda: f64 = cols[0].parse().map_err(|_| err())?;
        let mult: u64 = cols[1].parse().map_err(|_| err())?;
        levels.push((lambda, mult));
    }
    Ok(levels)
}

/// Sort and merge numerically equal eigenvalues, summing multiplicities.
fn aggregate(mut raw: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(raw.len());
    for (l, m) in raw {
        match out.last_mut() {
            Some(last) if same_eigenvalue(last.0, l) => last.1 += m,
            _ => out.push((l, m)),
        }
    }
    out
}

fn torus_eigenvalue(periods: &[f64], k: &[i64]) -> f64 {
    periods
        .iter()
        .zip(k)
        .map(|(p, &ki)| {
            let w = 2.0 * PI * ki as f64 / p;
            w * w
        })
        .sum()
}

fn torus_lattice_walk(periods: &[f64], cutoff: f64, cap: usize) -> Result<Vec<(f64, u64)>> {
    let bounds: Vec<i64> = periods
        .iter()
        .map(|p| (p * cutoff.sqrt() / (2.0 * PI)).floor() as i64)
        .collect();
    let box_size = bounds
        .iter()
        .try_fold(1usize, |acc, b| acc.checked_mul(2 * *b as usize + 1));
    match box_size {
        Some(n) if n <= cap.saturating_mul(8) => {}
        _ => return Err(Error::EnumerationCap { cutoff, cap }),
    }
    let mut out = Vec::new();
    let mut k: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        let lambda = torus_eigenvalue(periods, &k);
        if lambda <= cutoff {
            out.push((lambda, 1));
            check_cap(out.len(), cutoff, cap)?;
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == k.len() {
                return Ok(out);
            }
            if k[axis] < bounds[axis] {
                k[axis] += 1;
                break;
            }
            k[axis] = -bounds[axis];
            axis += 1;
        }
    }
}

#[derive(PartialEq)]
struct HeapKey(f64);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn torus_sorted_heap(periods: &[f64], cutoff: f64, cap: usize) -> Result<Vec<(f64, u64)>> {
    // Moving any coordinate toward zero lowers λ, so every lattice point in
    // the ball is reachable from the origin along a nondecreasing path.
    let origin = vec![0i64; periods.len()];
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(origin.clone());
    heap.push(Reverse((HeapKey(0.0), origin)));
    let mut out = Vec::new();
    while let Some(Reverse((HeapKey(lambda), k))) = heap.pop() {
        if lambda > cutoff {
            break;
        }
        out.push((lambda, 1));
        check_cap(out.len(), cutoff, cap)?;
        for axis in 0..k.len() {
            for step in [-1, 1] {
                let mut next = k.clone();
                next[axis] += step;
                if next[axis].abs() < k[axis].abs() {
                    continue;
                }
                if seen.insert(next.clone()) {
                    let l = torus_eigenvalue(periods, &next);
                    heap.push(Reverse((HeapKey(l), next)));
                }
            }
        }
    }
    Ok(out)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of degree-`l` spherical harmonics on `S^d`.
fn sphere_multiplicity(d: u64, l: u64) -> u64 {
    if l == 0 {
        return 1;
    }
    let lower = if l >= 2 { binomial(l + d - 2, d) } else { 0 };
    binomial(l + d, d) - lower
}

fn gamma_half_integer(twice: u64) -> f64 {
    // Γ(twice / 2) for twice ≥ 1
    if twice.is_multiple_of(2) {
        (1..twice / 2).map(|i| i as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while 2.0 * x < twice as f64 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

fn sphere_volume(d: usize, radius: f64) -> f64 {
    let half = (d + 1) as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_half_integer(d as u64 + 1) * radius.powi(d as i32)
}

/// One distinct merged eigenvalue with its total multiplicity and the
/// per-component breakdown `(component index, multiplicity)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLevel {
    pub lambda: f64,
    pub multiplicity: u64,
    pub components: Vec<(usize, u64)>,
}

/// A closed manifold given as an ordered disjoint union of components of
/// equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    components: Vec<CrossSectionComponent>,
    cap: usize,
    #[serde(skip)]
    strategy: Enumeration,
}

impl CrossSection {
    pub fn new(components: Vec<CrossSectionComponent>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidCrossSection(
                "a cross-section needs at least one component".into(),
            ));
        };
        let n = first.dimension();
        if let Some(c) = components.iter().find(|c| c.dimension() != n) {
            return Err(Error::InvalidCrossSection(format!(
                "components must share one dimension ({n} vs {})",
                c.dimension()
            )));
        }
        Ok(Self {
            components,
            cap: DEFAULT_ENUMERATION_CAP,
            strategy: Enumeration::default(),
        })
    }

    pub fn single(component: CrossSectionComponent) -> Self {
        Self::new(vec![component]).expect("one component is always valid")
    }

    pub fn with_enumeration_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_strategy(mut self, strategy: Enumeration) -> Self {
        self.strategy = strategy;
        self
    }

    /// The disjoint union `self ⊔ other`.
    pub fn disjoint_union(&self, other: &CrossSection) -> Result<CrossSection> {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        Ok(CrossSection::new(components)?.with_enumeration_cap(self.cap.max(other.cap)))
    }

    pub fn components(&self) -> &[CrossSectionComponent] {
        &self.components
    }

    /// Number of connected components (the multiplicity of eigenvalue 0).
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn dimension(&self) -> usize {
        self.components[0].dimension()
    }

    pub fn volume(&self) -> f64 {
        self.components.iter().map(|c| c.volume()).sum()
    }

    pub fn min_component_volume(&self) -> f64 {
        self.components.iter().map(|c| c.volume()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_component_volume(&self) -> f64 {
        self.components.iter().map(|c| c.volume()).fold(0.0, f64::max)
    }

    pub fn known_up_to(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.known_up_to())
            .fold(f64::INFINITY, f64::min)
    }

    /// All merged eigenvalues `≤ cutoff`, sorted, multiplicities aggregated
    /// over components.
    pub fn eigenvalues_below(&self, cutoff: f64) -> Result<Vec<SpectralLevel>> {
        let mut tagged: Vec<(f64, u64, usize)> = Vec::new();
        let mut total = 0usize;
        for (idx, comp) in self.components.iter().enumerate() {
            for (l, m) in comp.eigenvalues_below(cutoff, self.cap, self.strategy)? {
                total = total.saturating_add(m as usize);
                tagged.push((l, m, idx));
            }
        }
        check_cap(total, cutoff, self.cap)?;
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut out: Vec<SpectralLevel> = Vec::new();
        for (l, m, idx) in tagged {
            match out.last_mut() {
                Some(last) if same_eigenvalue(last.lambda, l) => {
                    last.multiplicity += m;
                    match last.components.last_mut() {
                        Some(c) if c.0 == idx => c.1 += m,
                        _ => last.components.push((idx, m)),
                    }
                }
                _ => out.push(SpectralLevel {
                    lambda: l,
                    multiplicity: m,
                    components: vec![(idx, m)],
                }),
            }
        }
        Ok(out)
    }

    /// The smallest positive merged eigenvalue `λ_{b+1}`.
    pub fn lambda_first_positive(&self) -> f64 {
        let mut cutoff = 1.0_f64;
        loop {
            let cut = cutoff.min(self.known_up_to());
            if let Ok(levels) = self.eigenvalues_below(cut) {
                if let Some(level) = levels.iter().find(|l| l.lambda > 0.0) {
                    return level.lambda;
                }
            }
            cutoff *= 4.0;
        }
    }

    /// The `index`-th merged eigenvalue (1-based, counted with multiplicity).
    pub fn lambda_at(&self, index: usize) -> Result<f64> {
        if index == 0 {
            return Err(Error::IndexOutOfRange {
                index,
                available: 0,
            });
        }
        let mut cutoff = self.lambda_first_positive();
        loop {
            let cut = cutoff.min(self.known_up_to());
            let levels = self.eigenvalues_below(cut)?;
            let mut count = 0usize;
            for level in &levels {
                count += level.multiplicity as usize;
                if count >= index {
                    return Ok(level.lambda);
                }
            }
            if cut >= self.known_up_to() {
                return Err(Error::IndexOutOfRange {
                    index,
                    available: count,
                });
            }
            cutoff *= 2.0;
        }
    }
}
