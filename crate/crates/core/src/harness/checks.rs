use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::mesh::MeshControl;
use crate::mode::{BoundaryCondition, ModeProblem};
use crate::profile::{MetricFamily, Profile, ProfileLabel};
use crate::rayleigh::grid::{neumann_poincare_check, BumpScenario, NP_SLACK};
use crate::rayleigh::{minmax_upper_bound, psi_family, psi_hypothesis_holds};
use crate::spectrum::{steklov_dirichlet_spectrum, steklov_spectrum, ProblemKind};

use super::{CheckName, CheckReport, CheckRow, Scenario, SweepPoint};

/// First positive Neumann eigenvalue of `Σ × I` for the metric on `I`:
/// the smaller of the second eigenvalue of the `λ = 0` mode and the first
/// eigenvalue of the lowest positive mode (mode eigenvalues increase with λ).
/// The P1 values are upper bounds of the exact ones.
pub fn neumann_gap(cs: &CrossSection, metric: &MetricFamily, control: &MeshControl) -> Result<f64> {
    use BoundaryCondition::Neumann;
    // P1 overestimates eigenvalues; a finer mesh keeps μ tight
    let control = &control.refined(3);
    let zero = ModeProblem::new(0.0, metric.clone(), Neumann, Neumann)?;
    let axial = zero.neumann_eigenvalues(&zero.mesh(control)?, 2)?[1];
    let lambda = cs.lambda_first_positive();
    let lateral = ModeProblem::new(lambda, metric.clone(), Neumann, Neumann)?;
    let lateral = lateral.neumann_eigenvalues(&lateral.mesh(control)?, 1)?[0];
    Ok(axial.min(lateral))
}

/// Least-squares slope of `log σ` against `log ε`.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn sigma(p: &SweepPoint, k: usize) -> Result<f64> {
    p.sigma.get(k - 1).copied().ok_or(Error::IndexOutOfRange {
        index: k,
        available: p.sigma.len(),
    })
}

/// Tolerated shortfall of `σ(ε/2) / σ(ε)` below 2 when 1/ε growth is required.
const GROWTH_SLACK: f64 = 0.1;

/// Rows `σ_k ε ≥ c` plus the slope and growth diagnostics; with
/// `require_growth` each ε step must also scale `σ_k` like `1/ε`.
fn lower_bound_rows(rep: &mut CheckReport, points: &[SweepPoint], k: usize, c: f64, require_growth: bool) -> Result<()> {
    let mut curve = Vec::new();
    for p in points {
        let s = sigma(p, k)?;
        curve.push((p.epsilon, s));
        rep.row(CheckRow::lower(Some(p.epsilon), Some(k), &format!("sigma_{k} * epsilon"), s * p.epsilon, c, 0.0));
    }
    if let Some(slope) = loglog_slope(&curve) {
        rep.diagnostics.insert("loglog_slope".into(), slope);
        if slope > -1.0 + 0.1 {
            rep.notes.push(format!("σ_{k} grows more slowly than 1/ε (log-log slope {slope:.3})"));
        }
    }
    for w in curve.windows(2) {
        let (e0, s0) = w[0];
        let (e1, s1) = w[1];
        let g = (s1 / s0) / (e0 / e1);
        if require_growth {
            rep.row(CheckRow::lower(Some(e1), Some(k), &format!("growth of sigma_{k} vs 1/epsilon"), g, 1.0 - GROWTH_SLACK, 0.0));
        } else {
            rep.diagnostics.insert(format!("growth_ratio[{e0}->{e1}]"), g);
        }
    }
    Ok(())
}

fn label_note(rep: &mut CheckReport, scenario: &Scenario, expected: ProfileLabel) {
    if scenario.metric.profile != expected {
        rep.notes.push(format!(
            "not applicable: the {} profile is not the {expected} construction; the bound holds only if σ happens to exceed it",
            scenario.metric.profile
        ));
    }
}

fn conf_a(rep: &mut CheckReport, cs: &CrossSection, b: usize) -> f64 {
    let lambda = rep.constant("lambda_b+1", cs.lambda_first_positive(), "first positive merged cross-section eigenvalue");
    rep.constant("b", b as f64, "boundary components of the two-sided cylinder");
    rep.constant("A", 0.25 * lambda.min(0.25), "A = min(λ_{b+1}, 1/4) / 4")
}

pub fn run_check(check: CheckName, scenario: &Scenario, points: &[SweepPoint]) -> Result<CheckReport> {
    let cs = scenario.cross_section()?;
    let l = scenario.metric.half_length;
    let b = scenario.boundary_components();
    let mut rep = CheckReport::new(check);
    match check {
        CheckName::Conf1 => {
            label_note(&mut rep, scenario, ProfileLabel::Conf1);
            rep.notes.push(
                "the collar profile is applied symmetrically at both boundary components of the cylinder".into(),
            );
            let a = conf_a(&mut rep, &cs, b);
            lower_bound_rows(&mut rep, points, b + 1, a, true)?;
        }
        CheckName::Conf2 => {
            label_note(&mut rep, scenario, ProfileLabel::Conf2);
            let a = conf_a(&mut rep, &cs, b);
            // Ω: the cylinder minus both collars Σ × [0, L/2), product metric
            let omega = MetricFamily::new(scenario.metric.family, scenario.n()?, Profile::identity(l)?.restrict(-0.5 * l, 0.5 * l)?);
            let mu = rep.constant(
                "mu_omega",
                neumann_gap(&cs, &omega, &scenario.solve.mesh)?,
                "first positive Neumann eigenvalue of Σ × [L/2, 3L/2]",
            );
            let vols: Vec<f64> = cs.components().iter().map(|c| c.volume()).collect();
            let vmin = vols.iter().copied().fold(f64::INFINITY, f64::min);
            let vmax = vols.iter().copied().fold(0.0, f64::max);
            rep.constant("min_sigma_j", vmin, "smallest boundary component volume");
            rep.constant("max_sigma_j", vmax, "largest boundary component volume");
            let bf = b as f64;
            let big_b = rep.constant(
                "B",
                (mu * bf * l).min(1.0 / (2.0 * bf)) / (32.0 * (bf - 1.0).powi(2)) * (vmin / vmax).powi(2),
                "B = min(μ b L, 1/(2b)) / (32 (b-1)²) · (min|Σ_j| / max|Σ_j|)²",
            );
            let c = rep.constant("C", 0.5 * a.min(big_b), "C = min(A, B) / 2");
            // a disconnected Σ makes the cylinder disconnected: one zero eigenvalue per piece
            let pieces = cs.components().len();
            if pieces > 1 {
                rep.notes.push(format!(
                    "the cylinder has {pieces} connected components; the bound is applied to σ_{}",
                    pieces + 1
                ));
            }
            lower_bound_rows(&mut rep, points, pieces + 1, c, false)?;
        }
        CheckName::Warped => {
            label_note(&mut rep, scenario, ProfileLabel::Warped);
            let lambda2 = rep.constant("lambda_2", cs.lambda_at(2)?, "second merged cross-section eigenvalue");
            let c = rep.constant("C", 0.25 * lambda2.min(1.0 / 6.0), "C = min(λ_2, 1/6) / 4");
            lower_bound_rows(&mut rep, points, 2, c, false)?;
            let d: Vec<f64> = points.iter().map(|p| p.boundary_distance).collect();
            let spread = d.iter().copied().fold(f64::MIN, f64::max) - d.iter().copied().fold(f64::MAX, f64::min);
            rep.diagnostics.insert("boundary_distance".into(), d[0]);
            rep.diagnostics.insert("boundary_distance_spread".into(), spread);
        }
        CheckName::PsiUpperBound => {
            let bound = rep.constant("2/L", 2.0 / l, "collar test functions: energy 2/L, boundary norm 1");
            rep.constant("b", b as f64, "boundary components of the two-sided cylinder");
            let mut noted = false;
            for p in points {
                let metric = scenario.metric(p.epsilon)?;
                if !psi_hypothesis_holds(&metric) && !noted {
                    rep.notes.push(format!(
                        "the {} profile differs from 1 outside the boundary collars Σ × [0, L/2); the bound is not implied",
                        scenario.metric.profile
                    ));
                    noted = true;
                }
                rep.row(CheckRow::upper(Some(p.epsilon), Some(b), &format!("sigma_{b}"), sigma(p, b)?, bound, 1e-6));
                let psi = minmax_upper_bound(&psi_family(&metric, &cs)?, &metric)?;
                let mut row = CheckRow::upper(Some(p.epsilon), Some(b), "psi_family_bound", psi.bound, bound, 0.0);
                row.slack = -(psi.bound - bound).abs();
                row.pass = (psi.bound - bound).abs() <= 1e-8;
                rep.row(row);
            }
        }
        CheckName::QuasiIso => {
            let ratio = rep.constant("A", scenario.checks.quasi_ratio, "pointwise metric ratio");
            let n = scenario.n()?;
            let exponent = (2 * (n + 1) + 1) as f64;
            let limit = rep.constant("A^(2(n+1)+1)", ratio.powf(exponent), "eigenvalue ratio bound for dimension n + 1");
            let kmax = scenario.checks.max_index;
            for p in points {
                let metric = scenario.metric(p.epsilon)?;
                // levels above 1 scaled by √A: g'/g = (h'/h)² ∈ [1, A]
                let other = MetricFamily::new(metric.family, metric.n, metric.profile.with_plateau_scale(ratio.sqrt())?);
                let mut req = scenario.request(p.epsilon, &cs, ProblemKind::SteklovTwoSided, kmax)?;
                req.metric = other;
                let res = steklov_spectrum(&req)?;
                let other_sigma = res.values(kmax)?;
                for k in 1..=kmax {
                    let (s0, s1) = (sigma(p, k)?, other_sigma[k - 1]);
                    let tiny = 1e-10 * s0.abs().max(s1.abs()).max(1.0);
                    let r = if s0.abs() <= tiny && s1.abs() <= tiny { 1.0 } else { s1 / s0 };
                    let dev = if r > 0.0 { r.max(1.0 / r) } else { f64::INFINITY };
                    let mut row = CheckRow::upper(Some(p.epsilon), Some(k), "sigma_ratio", r, limit, 0.0);
                    row.slack = limit - dev;
                    row.pass = dev <= limit;
                    rep.row(row);
                }
            }
        }
        CheckName::Kokarev => {
            rep.constant("genus", 0.0, "cylinders over circles have genus 0");
            for p in points {
                let bound = 8.0 * std::f64::consts::PI / p.boundary_measure;
                let mut row = CheckRow::upper(Some(p.epsilon), Some(2), "sigma_2", sigma(p, 2)?, bound, 0.0);
                row.pass = row.slack >= 0.0;
                rep.row(row);
            }
        }
        CheckName::N2Bound => {
            let n = scenario.n()?;
            let lambda2 = rep.constant("lambda_2", cs.lambda_at(2)?, "second merged cross-section eigenvalue");
            let bound = rep.constant("2 L lambda_2", 2.0 * l * lambda2, "energy of the mode-λ_2 test function a ≡ 1");
            if n == 2 {
                for p in points {
                    rep.row(CheckRow::upper(Some(p.epsilon), Some(2), "sigma_2", sigma(p, 2)?, bound, 1e-6));
                }
            } else {
                let p = points.last().expect("sweep has at least one point");
                let s = sigma(p, 2)?;
                let mut row = CheckRow::lower(Some(p.epsilon), Some(2), "sigma_2 (exceeds)", s, bound, 0.0);
                row.pass = s > bound;
                rep.row(row);
                rep.notes.push(format!("n = {n}: σ_2 is expected to exceed 2Lλ_2 at the smallest ε"));
            }
        }
        CheckName::VolumeGrowth => {
            let product = MetricFamily::new(scenario.metric.family, scenario.n()?, Profile::identity(l)?);
            let base = rep.constant("product_volume", product.volume(&cs), "volume of Σ × [-L, L] with h ≡ 1");
            let constant_expected = scenario.metric.profile == ProfileLabel::Identity;
            for w in points.windows(2) {
                let (v0, v1) = (w[0].volume, w[1].volume);
                let mut row = CheckRow::lower(Some(w[1].epsilon), None, "volume", v1, v0, 0.0);
                row.pass = if constant_expected {
                    (v1 - v0).abs() <= 1e-12 * v0
                } else {
                    v1 > v0
                };
                rep.row(row);
            }
            if let Some(last) = points.last() {
                let ratio = last.volume / base;
                if constant_expected {
                    rep.diagnostics.insert("volume_ratio_at_smallest_epsilon".into(), ratio);
                } else {
                    let min = scenario.checks.min_volume_ratio;
                    rep.row(CheckRow::lower(Some(last.epsilon), None, "volume_ratio", ratio, min, 0.0));
                }
            }
            if points.len() < 2 {
                rep.notes.push("a single ε gives no growth to check".into());
            }
        }
        CheckName::NeumannPoincare => {
            let periods = scenario.torus_periods().expect("validated");
            let omega = MetricFamily::new(scenario.metric.family, 2, Profile::identity(l)?.restrict(0.5 * l, l)?);
            let mu = rep.constant(
                "mu_omega",
                neumann_gap(&cs, &omega, &scenario.solve.mesh)?,
                "first positive Neumann eigenvalue of Σ × [L/2, L]",
            );
            let r = neumann_poincare_check(periods, 0.5 * l, l, mu, scenario.checks.neumann_trials, scenario.seed)?;
            rep.row(CheckRow {
                epsilon: None,
                index: None,
                quantity: "min lhs - rhs".into(),
                value: r.min_slack,
                bound: -NP_SLACK,
                slack: r.min_slack,
                pass: r.pass,
            });
            rep.diagnostics.insert("worst_ratio".into(), r.worst_ratio);
            rep.diagnostics.insert("trials".into(), r.trials as f64);
            rep.diagnostics.insert("violations".into(), r.violations as f64);
        }
        CheckName::CollarDomination => {
            let kmax = scenario.checks.max_index;
            for p in points {
                let depth = scenario.checks.collar_depth.unwrap_or(p.epsilon);
                let metric = scenario.metric(p.epsilon)?;
                let (a, _) = metric.profile.domain();
                if !metric.profile.is_one_on(a, a + depth) {
                    return Err(Error::CollarHypothesis(format!(
                        "the {} profile at ε = {} is not 1 on the collar of depth {depth}",
                        metric.profile.label(),
                        p.epsilon
                    )));
                }
                let req = scenario.request(p.epsilon, &cs, ProblemKind::SteklovDirichletCollar { depth }, kmax)?;
                let collar = steklov_dirichlet_spectrum(&req)?.values(kmax)?;
                for k in 1..=kmax {
                    let bound = collar[k - 1];
                    rep.row(CheckRow::upper(Some(p.epsilon), Some(k), "sigma_k", sigma(p, k)?, bound, 1e-8));
                }
            }
        }
        CheckName::SmallEigenvalues => {
            let cfg = &scenario.checks.small_eigenvalues;
            let bumps = BumpScenario {
                periods: scenario.torus_periods().expect("validated"),
                half_length: l,
                ball_radius: cfg.ball_radius,
                bumps: cfg.bumps,
                resolution: cfg.resolution,
                bump_elements: cfg.bump_elements,
            };
            rep.constant("bump_radius", bumps.bump_radius(), "ball radius / (2k)");
            let mut prev: Option<Vec<f64>> = None;
            for &m in &cfg.m {
                let bound = bumps.problem(m)?.upper_bound(cfg.refinements)?;
                for (j, v) in bound.eigenvalues.iter().enumerate() {
                    rep.diagnostics.insert(format!("sigma_{}_bound[m={m}]", j + 1), *v);
                }
                if let Some(err) = bound.error_bar {
                    rep.diagnostics.insert(format!("error_bar[m={m}]"), err);
                }
                if let Some(prev) = &prev {
                    for j in 2..=bound.k() {
                        let v = bound.eigenvalues[j - 1];
                        let mut row = CheckRow::upper(None, Some(j), &format!("sigma_{j} bound at m = {m}"), v, prev[j - 1], 0.0);
                        row.pass = v < prev[j - 1];
                        rep.row(row);
                    }
                }
                prev = Some(bound.eigenvalues);
            }
            if let (Some(m), Some(last)) = (cfg.m.last(), &prev) {
                for j in 2..=last.len() {
                    rep.row(CheckRow::upper(None, Some(j), &format!("sigma_{j} bound at m = {m}"), last[j - 1], cfg.below, 0.0));
                }
            }
        }
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSectionComponent;
    use crate::profile::Family;
    use std::f64::consts::PI;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, 3.0 / e)).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn neumann_gap_of_product_torus_slab() {
        let cs = CrossSection::single(CrossSectionComponent::flat_torus(&[2.0 * PI, 2.0 * PI]).unwrap());
        let slab = |len: f64| MetricFamily::new(Family::Conformal, 2, Profile::identity(1.0).unwrap().restrict(1.0 - len, 1.0).unwrap());
        // lateral mode wins on a long slab, the axial one on a short slab
        let long = neumann_gap(&cs, &slab(1.0), &MeshControl::default()).unwrap();
        assert!((long - 1.0).abs() < 1e-10, "{long}");
        let short = neumann_gap(&cs, &slab(0.25), &MeshControl::default()).unwrap();
        assert!(short < 1.0 + 1e-9);
        let cs_big = CrossSection::single(CrossSectionComponent::flat_torus(&[0.5, 0.5]).unwrap());
        let axial = neumann_gap(&cs_big, &slab(1.0), &MeshControl::default()).unwrap();
        assert!((axial - PI * PI).abs() < 1e-3 * PI * PI, "{axial}");
    }
}
