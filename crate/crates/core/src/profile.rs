//! Axial factor functions `h(t)` and the metric families built on them.
//!
//! A [`Profile`] is a contiguous list of pieces, each either constant or a
//! monotone C^∞ transition between two levels. Transitions interpolate in
//! log space with the smoothstep
//!
//! ```text
//! s(τ) = σ(τ) / (σ(τ) + σ(1 - τ)),   σ(τ) = exp(-1/τ) for τ > 0, else 0
//! h(t) = exp(ln(from) + s(τ) · (ln(to) - ln(from))),  τ = (t - start) / (end - start)
//! ```
//!
//! so plateau values are stored exactly and every derivative vanishes at the
//! piece junctions.
//!
//! Coordinate conventions: conformal profiles (`conf1`, `conf2`) live on
//! `[0, 2L]`, i.e. the collar coordinate measured from the first boundary
//! component. Warped and identity profiles live on `[-L, L]`.

use serde::{Deserialize, Serialize};

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileLabel {
    /// Plateau `ε⁻²` on `[2ε, 3ε]` from each end, `h = 1` outside `(ε, 4ε)`.
    Conf1,
    /// `h = 1` on `[0, ε)` from each end, `ε⁻²` at distance `≥ L/2` from the boundary.
    Conf2,
    /// Even profile: `1` within `ε` of each end, `ε⁻²` on `[-L + 2ε, L - 2ε]`.
    Warped,
    Identity,
    Custom,
}

impl ProfileLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileLabel::Conf1 => "conf1",
            ProfileLabel::Conf2 => "conf2",
            ProfileLabel::Warped => "warped",
            ProfileLabel::Identity => "identity",
            ProfileLabel::Custom => "custom",
        }
    }
}

impl std::fmt::Display for ProfileLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PieceKind {
    Constant { value: f64 },
    Transition { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub kind: PieceKind,
}

impl Piece {
    fn constant(start: f64, end: f64, value: f64) -> Self {
        Piece {
            start,
            end,
            kind: PieceKind::Constant { value },
        }
    }

    fn transition(start: f64, end: f64, from: f64, to: f64) -> Self {
        Piece {
            start,
            end,
            kind: PieceKind::Transition { from, to },
        }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    fn left_value(&self) -> f64 {
        match self.kind {
            PieceKind::Constant { value } => value,
            PieceKind::Transition { from, .. } => from,
        }
    }

    fn right_value(&self) -> f64 {
        match self.kind {
            PieceKind::Constant { value } => value,
            PieceKind::Transition { to, .. } => to,
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self.kind {
            PieceKind::Constant { value } => value,
            PieceKind::Transition { from, to } => {
                let tau = (t - self.start) / self.length();
                let s = smoothstep(tau);
                if s <= 0.0 {
                    from
                } else if s >= 1.0 {
                    to
                } else {
                    (from.ln() + s * (to.ln() - from.ln())).exp()
                }
            }
        }
    }

    fn log_derivative(&self, t: f64) -> f64 {
        match self.kind {
            PieceKind::Constant { .. } => 0.0,
            PieceKind::Transition { from, to } => {
                let tau = (t - self.start) / self.length();
                smoothstep_derivative(tau) * (to.ln() - from.ln()) / self.length()
            }
        }
    }
}

fn bump(tau: f64) -> f64 {
    if tau > 0.0 {
        (-1.0 / tau).exp()
    } else {
        0.0
    }
}

/// C^∞ monotone step from 0 (for `τ ≤ 0`) to 1 (for `τ ≥ 1`).
pub fn smoothstep(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let a = bump(tau);
    let b = bump(1.0 - tau);
    a / (a + b)
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_derivative(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        return 0.0;
    }
    let a = bump(tau);
    let b = bump(1.0 - tau);
    let da = a / (tau * tau);
    let db = -b / ((1.0 - tau) * (1.0 - tau));
    let denom = a + b;
    (da * b - a * db) / (denom * denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    label: ProfileLabel,
    epsilon: f64,
    half_length: f64,
    pieces: Vec<Piece>,
}

fn range_error(label: ProfileLabel, epsilon: f64, constraint: String) -> Error {
    Error::EpsilonRange {
        label: label.to_string(),
        epsilon,
        constraint,
    }
}

impl Profile {
    /// Build one of the named profile families.
    ///
    /// With `strict` the hypotheses on `ε` behind the lower bounds are enforced
    /// (`ε < min(L/4, 2/L)` for the conformal labels, `ε < min(L, 1/L)/4`
    /// for `warped`); otherwise only the geometric feasibility of the piece
    /// layout is required.
    pub fn make(label: ProfileLabel, epsilon: f64, half_length: f64, strict: bool) -> Result<Profile> {
        let l = half_length;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidProfile(format!("L must be positive, got {l}")));
        }
        if label != ProfileLabel::Identity && !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(range_error(label, epsilon, "ε > 0".into()));
        }
        // (1/ε)² rounds to the exact plateau for the usual dyadic ε grid
        let top = (1.0 / epsilon).powi(2);
        let pieces = match label {
            ProfileLabel::Identity => vec![Piece::constant(-l, l, 1.0)],
            ProfileLabel::Conf1 | ProfileLabel::Conf2 => {
                let bound = (l / 4.0).min(2.0 / l);
                if strict && epsilon >= bound {
                    return Err(range_error(label, epsilon, format!("ε < min(L/4, 2/L) = {bound}")));
                }
                let end = 2.0 * l;
                if label == ProfileLabel::Conf1 {
                    if 4.0 * epsilon >= l {
                        return Err(range_error(label, epsilon, format!("4ε < L = {l}")));
                    }
                    let e = epsilon;
                    vec![
                        Piece::constant(0.0, e, 1.0),
                        Piece::transition(e, 2.0 * e, 1.0, top),
                        Piece::constant(2.0 * e, 3.0 * e, top),
                        Piece::transition(3.0 * e, 4.0 * e, top, 1.0),
                        Piece::constant(4.0 * e, end - 4.0 * e, 1.0),
                        Piece::transition(end - 4.0 * e, end - 3.0 * e, 1.0, top),
                        Piece::constant(end - 3.0 * e, end - 2.0 * e, top),
                        Piece::transition(end - 2.0 * e, end - e, top, 1.0),
                        Piece::constant(end - e, end, 1.0),
                    ]
                } else {
                    if epsilon >= l / 2.0 {
                        return Err(range_error(label, epsilon, format!("ε < L/2 = {}", l / 2.0)));
                    }
                    vec![
                        Piece::constant(0.0, epsilon, 1.0),
                        Piece::transition(epsilon, l / 2.0, 1.0, top),
                        Piece::constant(l / 2.0, end - l / 2.0, top),
                        Piece::transition(end - l / 2.0, end - epsilon, top, 1.0),
                        Piece::constant(end - epsilon, end, 1.0),
                    ]
                }
            }
            ProfileLabel::Warped => {
                let bound = l.min(1.0 / l) / 4.0;
                if strict && epsilon >= bound {
                    return Err(range_error(label, epsilon, format!("ε < min(L, 1/L)/4 = {bound}")));
                }
                if 2.0 * epsilon >= l {
                    return Err(range_error(label, epsilon, format!("2ε < L = {l}")));
                }
                let e = epsilon;
                vec![
                    Piece::constant(-l, -l + e, 1.0),
                    Piece::transition(-l + e, -l + 2.0 * e, 1.0, top),
                    Piece::constant(-l + 2.0 * e, l - 2.0 * e, top),
                    Piece::transition(l - 2.0 * e, l - e, top, 1.0),
                    Piece::constant(l - e, l, 1.0),
                ]
            }
            ProfileLabel::Custom => {
                return Err(Error::InvalidProfile(
                    "custom profiles are built from an explicit piece list".into(),
                ))
            }
        };
        Ok(Profile {
            label,
            epsilon: if label == ProfileLabel::Identity { l } else { epsilon },
            half_length: l,
            pieces,
        })
    }

    /// The product-metric profile `h ≡ 1` on `[-L, L]`.
    pub fn identity(half_length: f64) -> Result<Profile> {
        Profile::make(ProfileLabel::Identity, half_length, half_length, false)
    }

    /// A custom profile from an ordered, contiguous piece list. `epsilon`
    /// sets the length scale used for mesh grading.
    pub fn custom(pieces: Vec<Piece>, epsilon: f64) -> Result<Profile> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if pieces.is_empty() {
            return bad("a profile needs at least one piece".into());
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return bad(format!("length scale must be positive, got {epsilon}"));
        }
        for p in &pieces {
            if !(p.end > p.start) {
                return bad(format!("piece [{}, {}] has nonpositive length", p.start, p.end));
            }
            let (a, b) = (p.left_value(), p.right_value());
            if !(a >= 1.0 - 1e-12 && b >= 1.0 - 1e-12 && a.is_finite() && b.is_finite()) {
                return bad(format!("profile values must be finite and ≥ 1, got {a} and {b}"));
            }
        }
        for w in pieces.windows(2) {
            if w[0].end != w[1].start {
                return bad(format!("pieces must be contiguous ({} vs {})", w[0].end, w[1].start));
            }
            let (a, b) = (w[0].right_value(), w[1].left_value());
            if (a - b).abs() > 1e-12 * a.max(b) {
                return bad(format!("profile is discontinuous at t = {} ({a} vs {b})", w[0].end));
            }
        }
        let half_length = 0.5 * (pieces[pieces.len() - 1].end - pieces[0].start);
        Ok(Profile {
            label: ProfileLabel::Custom,
            epsilon,
            half_length,
            pieces,
        })
    }

    pub fn label(&self) -> ProfileLabel {
        self.label
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Half the axial length of the cylinder, `L`.
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].start, self.pieces[self.pieces.len() - 1].end)
    }

    /// Piece endpoints including both domain ends.
    pub fn junctions(&self) -> Vec<f64> {
        let mut out = vec![self.pieces[0].start];
        out.extend(self.pieces.iter().map(|p| p.end));
        out
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces
            .partition_point(|p| p.end < t)
            .min(self.pieces.len() - 1)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::OutsideDomain { t, lo, hi })
        }
    }

    /// `h(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.value(t))
    }

    /// `h(t)` measured from the first domain end, `s = t - t₀`.
    pub fn evaluate_from_start(&self, s: f64) -> Result<f64> {
        self.evaluate(self.domain().0 + s)
    }

    /// `(ln h)'(t)`, used for diagnostics and smoothness checks.
    pub fn evaluate_log_derivative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.pieces[self.piece_index(t)].log_derivative(t))
    }

    /// `h(t)` without the domain check; `t` is clamped into the domain.
    pub(crate) fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        self.pieces[self.piece_index(t)].value(t)
    }

    pub fn max_value(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.left_value().max(p.right_value()))
            .fold(1.0, f64::max)
    }

    /// Whether every piece meeting `[a, b]` is the constant 1.
    pub fn is_one_on(&self, a: f64, b: f64) -> bool {
        self.pieces
            .iter()
            .filter(|p| p.end > a && p.start < b)
            .all(|p| matches!(p.kind, PieceKind::Constant { value } if value == 1.0))
    }

    /// Restriction to `[a, b] ⊂ domain`, keeping the piece shapes.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Profile> {
        self.check_domain(a)?;
        self.check_domain(b)?;
        if !(b > a) {
            return Err(Error::InvalidProfile(format!("empty restriction [{a}, {b}]")));
        }
        let mut pieces = Vec::new();
        for p in self.pieces.iter().filter(|p| p.end > a && p.start < b) {
            let (s, e) = (p.start.max(a), p.end.min(b));
            let kind = match p.kind {
                PieceKind::Constant { .. } => p.kind,
                PieceKind::Transition { .. } if s == p.start && e == p.end => p.kind,
                PieceKind::Transition { .. } => {
                    return Err(Error::InvalidProfile(format!(
                        "restriction [{a}, {b}] cuts through a transition of the {} profile",
                        self.label
                    )));
                }
            };
            pieces.push(Piece { start: s, end: e, kind });
        }
        let mut out = Profile::custom(pieces, self.epsilon)?;
        out.label = self.label;
        Ok(out)
    }

    /// Multiply every level above 1 by `factor ≥ 1`. Levels equal to 1 are
    /// kept, so `h = 1` regions and the boundary stay untouched and the
    /// pointwise ratio to the original lies in `[1, factor]`.
    pub fn with_plateau_scale(&self, factor: f64) -> Result<Profile> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::InvalidProfile(format!("plateau scale must be ≥ 1, got {factor}")));
        }
        let scale = |v: f64| if v > 1.0 { v * factor } else { v };
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                start: p.start,
                end: p.end,
                kind: match p.kind {
                    PieceKind::Constant { value } => PieceKind::Constant { value: scale(value) },
                    PieceKind::Transition { from, to } => PieceKind::Transition {
                        from: scale(from),
                        to: scale(to),
                    },
                },
            })
            .collect();
        Profile::custom(pieces, self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `g' = h² (g₀ + dt²)`
    Conformal,
    /// `g' = h² g₀ + dt²`
    Warped,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Conformal => "conformal",
            Family::Warped => "warped",
        }
    }
}

/// A metric family on `Σ × I` with `n = dim Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFamily {
    pub family: Family,
    pub n: usize,
    pub profile: Profile,
}

impl MetricFamily {
    pub fn new(family: Family, n: usize, profile: Profile) -> Self {
        MetricFamily { family, n, profile }
    }

    /// Exponents `(α_p, α_q, α_r)` with `p = h^{α_p}`, `q = λ h^{α_q}`,
    /// `r = h^{α_r}` (energy, potential and volume densities).
    pub fn exponents(&self) -> (i32, i32, i32) {
        let n = self.n as i32;
        match self.family {
            Family::Conformal => (n - 1, n - 1, n + 1),
            Family::Warped => (n, n - 2, n),
        }
    }

    pub fn p(&self, t: f64) -> f64 {
        self.profile.value(t).powi(self.exponents().0)
    }

    /// `h^{α_q}`; multiply by `λ` for the potential.
    pub fn q_factor(&self, t: f64) -> f64 {
        self.profile.value(t).powi(self.exponents().1)
    }

    pub fn r(&self, t: f64) -> f64 {
        self.profile.value(t).powi(self.exponents().2)
    }

    /// Boundary measure density `h^n` at an endpoint.
    pub fn boundary_weight(&self, t: f64) -> f64 {
        self.profile.value(t).powi(self.n as i32)
    }

    /// `|M|` for the cylinder over `cs`: `|Σ| ∫ h^{α_r} dt`.
    pub fn volume(&self, cs: &CrossSection) -> f64 {
        let alpha = self.exponents().2;
        let f = |t: f64| self.profile.value(t).powi(alpha);
        cs.volume() * quadrature::adaptive_pieces(&f, &self.profile.junctions(), 1e-12)
    }

    /// Distance between the two boundary components along the axis:
    /// `∫ h dt` for conformal metrics, the axial length for warped ones.
    pub fn boundary_distance(&self) -> f64 {
        let (a, b) = self.profile.domain();
        match self.family {
            Family::Warped => b - a,
            Family::Conformal => quadrature::adaptive_pieces(
                &|t: f64| self.profile.value(t),
                &self.profile.junctions(),
                1e-12,
            ),
        }
    }

    /// Total boundary measure `|∂M|` of the two-sided cylinder.
    pub fn boundary_measure(&self, cs: &CrossSection) -> f64 {
        let (a, b) = self.profile.domain();
        cs.volume() * (self.boundary_weight(a) + self.boundary_weight(b))
    }
}
