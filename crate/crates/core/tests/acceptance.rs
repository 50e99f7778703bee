//! One line per acceptance criterion. Two criteria cannot hold as stated;
//! for those the literal setup is reported as FAIL, the mechanism that makes
//! it unattainable is asserted, and a corrected variant must pass.

use std::collections::BTreeMap;
use std::time::Instant;

use steklov_core::harness::{run_check, sweep, CheckName, CheckReport, Scenario, SweepPoint};
use steklov_core::profile::{Family, MetricFamily, Profile};
use steklov_core::rayleigh::psi_hypothesis_holds;
use steklov_core::spectrum::steklov_spectrum;
use steklov_core::{CrossSection, CrossSectionComponent, ProblemKind, SpectrumRequest};

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    /// Fails as stated, for a reason confirmed by the run.
    Unattainable,
}

struct Line {
    id: &'static str,
    verdict: Verdict,
    detail: String,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn torus(dim: usize) -> String {
    let p = vec![TWO_PI.to_string(); dim].join(", ");
    format!("[{{ kind = \"flat-torus\", periods = [{p}] }}]")
}

fn scenario(name: &str, components: &str, family: &str, profile: &str, l: f64, eps: &[f64], checks: &str) -> Scenario {
    let eps: Vec<String> = eps.iter().map(|e| e.to_string()).collect();
    let text = format!(
        "name = \"{name}\"\n\
         [cross_section]\ncomponents = {components}\n\
         [metric]\nfamily = \"{family}\"\nprofile = \"{profile}\"\nhalf_length = {l}\nepsilons = [{}]\n\
         [checks]\nrun = []\n{checks}\n",
        eps.join(", ")
    );
    Scenario::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Sweeps are shared between criteria.
struct Suite {
    sweeps: BTreeMap<String, (Scenario, Vec<SweepPoint>)>,
}

impl Suite {
    fn add(&mut self, s: Scenario) {
        let points = sweep(&s).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        self.sweeps.insert(s.name.clone(), (s, points));
    }

    fn check(&self, name: &str, check: CheckName) -> CheckReport {
        let (s, p) = &self.sweeps[name];
        run_check(check, s, p).unwrap_or_else(|e| panic!("{name}/{check}: {e}"))
    }

    fn points(&self, name: &str) -> &[SweepPoint] {
        &self.sweeps[name].1
    }
}

fn min_slack(rep: &CheckReport) -> f64 {
    rep.rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min)
}

fn circle_product(l: f64, count: usize) -> SpectrumRequest {
    let cs = CrossSection::single(CrossSectionComponent::circle(1.0).unwrap());
    let metric = MetricFamily::new(Family::Conformal, 1, Profile::identity(l).unwrap());
    SpectrumRequest::new(cs, metric, ProblemKind::SteklovTwoSided, count)
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let res = steklov_spectrum(&circle_product(1.0, 10).with_richardson(true)).unwrap();
    let computed = res.values(10).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut exact = vec![0.0, 1.0];
    for k in 1..=6 {
        let k = k as f64;
        exact.extend([k * k.tanh(), k * k.tanh(), k / k.tanh(), k / k.tanh()]);
    }
    exact.sort_by(f64::total_cmp);
    let err = computed
        .iter()
        .zip(&exact)
        .map(|(c, e)| if *e == 0.0 { c.abs() } else { (c - e).abs() / e })
        .fold(0.0, f64::max);
    Line {
        id: "1",
        verdict: verdict(err <= 1e-6 && elapsed < 1.0),
        detail: format!("product circle, L = 1: max relative error {err:.2e} over σ_1..σ_10 in {elapsed:.3} s"),
    }
}

fn criterion_2() -> Line {
    let base = circle_product(1.0, 2).with_richardson(false);
    let values: Vec<f64> = (0..4)
        .map(|level| {
            let req = base.clone().with_mesh(base.mesh.refined(level));
            steklov_spectrum(&req).unwrap().sigma_index(2).unwrap()
        })
        .collect();
    let orders: Vec<f64> = values.windows(3).map(|w| ((w[0] - w[1]) / (w[1] - w[2])).log2()).collect();
    let ok = orders.iter().all(|p| (1.8..=2.2).contains(p));
    Line {
        id: "2",
        verdict: verdict(ok),
        detail: format!("observed orders of σ_2 over three halvings: {orders:.4?}"),
    }
}

fn criterion_3(suite: &Suite, elapsed: f64) -> Line {
    let rep = suite.check("conf1", CheckName::Conf1);
    let a = rep.constants["A"].value;
    let products: Vec<f64> = rep.rows.iter().filter(|r| r.quantity.ends_with("* epsilon")).map(|r| r.value).collect();
    let growth: Vec<f64> = rep.rows.iter().filter(|r| r.quantity.starts_with("growth")).map(|r| 2.0 * r.value).collect();
    Line {
        id: "3",
        verdict: verdict(rep.pass && (a - 1.0 / 16.0).abs() < 1e-15 && elapsed < 120.0),
        detail: format!(
            "conf1 torus: σ_3·ε = {products:.4?} ≥ A = {a}; σ_3 ratio per halving {growth:.3?}; {elapsed:.1} s"
        ),
    }
}

fn criterion_4(suite: &Suite) -> [Line; 2] {
    let rep = suite.check("conf2", CheckName::PsiUpperBound);
    let (s, points) = &suite.sweeps["conf2"];
    let hypothesis_fails = points.iter().all(|p| !psi_hypothesis_holds(&s.metric(p.epsilon).unwrap()));
    let sigma_b: Vec<f64> = points.iter().map(|p| p.sigma[1]).collect();
    let literal = Line {
        id: "4",
        verdict: if rep.pass {
            Verdict::Pass
        } else if hypothesis_fails {
            Verdict::Unattainable
        } else {
            Verdict::Fail
        },
        detail: format!(
            "conf2 torus: σ_2 = {sigma_b:.3?} against 2/L = 2; conf2 changes the metric outside Σ × [0, L/2), \
             where the collar bound needs it unchanged, and the same profile forces σ_2 ≥ C/ε"
        ),
    };
    let variant = suite.check("conf1", CheckName::PsiUpperBound);
    let variant = Line {
        id: "4 (conf1)",
        verdict: verdict(variant.pass),
        detail: format!(
            "conf1 torus, same ε grid: σ_2 ≤ 2 + 1e-6 and ψ bound = 2/L to 1e-8, worst slack {:.2e}",
            min_slack(&variant)
        ),
    };
    [literal, variant]
}

fn warped_line(suite: &Suite, name: &str, id: &'static str) -> (CheckReport, Line) {
    let rep = suite.check(name, CheckName::Warped);
    let l = suite.sweeps[name].0.metric.half_length;
    let d = rep.diagnostics["boundary_distance"];
    let spread = rep.diagnostics["boundary_distance_spread"];
    let products: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    let distance_ok = (d - 2.0 * l).abs() < 1e-12 && spread == 0.0;
    let line = Line {
        id,
        verdict: verdict(rep.pass && distance_ok),
        detail: format!("{name}: σ_2·ε = {products:.4?} against 1/24; boundary distance {d} (spread {spread})"),
    };
    (rep, line)
}

fn criterion_5(suite: &Suite) -> [Line; 2] {
    let (rep, mut literal) = warped_line(suite, "warped-t2", "5");
    let cap = suite.check("warped-t2", CheckName::N2Bound);
    let eps_max = suite.points("warped-t2")[0].epsilon;
    let ceiling = cap.constants["2 L lambda_2"].value;
    if !rep.pass && cap.pass && ceiling < 1.0 / (24.0 * eps_max) {
        literal.verdict = Verdict::Unattainable;
        literal.detail += &format!("; σ_2 ≤ 2Lλ_2 = {ceiling} < 1/(24ε) for every ε ≤ {eps_max} when n = 2");
    }
    let (_, variant) = warped_line(suite, "warped-t3", "5 (T³)");
    [literal, variant]
}

fn criterion_6(suite: &Suite) -> Line {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["warped-t2", "warped-t3"] {
        let rep = suite.check(name, CheckName::QuasiIso);
        let worst = rep.rows.iter().map(|r| r.value.max(1.0 / r.value)).fold(1.0, f64::max);
        ok &= rep.pass;
        detail.push(format!("{name}: worst ratio {worst:.4} ≤ {:.4}", rep.constants["A^(2(n+1)+1)"].value));
    }
    Line {
        id: "6",
        verdict: verdict(ok),
        detail: detail.join("; "),
    }
}

fn criterion_7(suite: &Suite) -> Line {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let names: Vec<&String> = suite.sweeps.keys().filter(|k| k.starts_with("circle")).collect();
    for name in &names {
        let rep = suite.check(name, CheckName::Kokarev);
        ok &= rep.pass;
        worst = worst.min(min_slack(&rep));
    }
    Line {
        id: "7",
        verdict: verdict(ok && !names.is_empty()),
        detail: format!("{} circle scenarios: σ_2 ≤ 8π/|∂M|, smallest slack {worst:.4}", names.len()),
    }
}

fn criterion_8(suite: &Suite) -> Line {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for name in ["warped-t2", "warped-t2-long"] {
        let rep = suite.check(name, CheckName::N2Bound);
        ok &= rep.pass;
        worst = worst.min(min_slack(&rep));
    }
    let above = suite.check("warped-t3", CheckName::N2Bound);
    let row = &above.rows[0];
    Line {
        id: "8",
        verdict: verdict(ok && above.pass),
        detail: format!(
            "n = 2 sweeps stay below 2Lλ_2 (smallest slack {worst:.4}); n = 3 at ε = {}: σ_2 = {:.4} > {:.4}",
            row.epsilon.unwrap(),
            row.value,
            row.bound
        ),
    }
}

fn criterion_9(suite: &Suite) -> Line {
    let rep = suite.check("bumps", CheckName::SmallEigenvalues);
    let at = |j: usize, m: u32| rep.diagnostics[&format!("sigma_{j}_bound[m={m}]")];
    let err = rep.diagnostics.get("error_bar[m=1000]").copied().unwrap_or(f64::NAN);
    Line {
        id: "9",
        verdict: verdict(rep.pass),
        detail: format!(
            "bump factors: σ_2 bounds {:.3e}, {:.3e}, {:.3e}; σ_3 bounds {:.3e}, {:.3e}, {:.3e} (error bar at m = 1000: {err:.1e})",
            at(2, 10),
            at(2, 100),
            at(2, 1000),
            at(3, 10),
            at(3, 100),
            at(3, 1000)
        ),
    }
}

fn criterion_10(suite: &Suite) -> Line {
    let rep = suite.check("conf2", CheckName::NeumannPoincare);
    Line {
        id: "10",
        verdict: verdict(rep.pass && rep.diagnostics["trials"] == 100.0),
        detail: format!(
            "{} trials with μ = {:.6}: smallest lhs - rhs {:.3e}, smallest lhs/rhs {:.3}",
            rep.diagnostics["trials"],
            rep.constants["mu_omega"].value,
            rep.rows[0].value,
            rep.diagnostics["worst_ratio"]
        ),
    }
}

fn criterion_11(suite: &Suite) -> Line {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let mut rows = 0;
    for name in ["conf2", "conf2-pair"] {
        let rep = suite.check(name, CheckName::CollarDomination);
        ok &= rep.pass && min_slack(&rep) >= -1e-8;
        worst = worst.min(min_slack(&rep));
        rows += rep.rows.len();
    }
    Line {
        id: "11",
        verdict: verdict(ok),
        detail: format!("conf2 sweeps, k ≤ 10: {rows} comparisons, smallest slack {worst:.4}"),
    }
}

fn criterion_12(suite: &Suite) -> Line {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["conf1", "conf2", "warped-t2"] {
        let rep = suite.check(name, CheckName::VolumeGrowth);
        ok &= rep.pass;
        let ratio = rep.rows.iter().find(|r| r.quantity == "volume_ratio").map(|r| r.value);
        ok &= ratio.is_some();
        detail.push(format!("{name} ×{:.2e}", ratio.unwrap_or(f64::NAN)));
    }
    Line {
        id: "12",
        verdict: verdict(ok),
        detail: format!("volume strictly increasing; at the smallest ε: {}", detail.join(", ")),
    }
}

fn main() {
    // `cargo test -- <filter>` passes arguments the harness-less target ignores
    let mut lines = vec![criterion_1(), criterion_2()];

    let grid = [0.1, 0.05, 0.025, 0.0125];
    let warped_grid = [0.05, 0.025, 0.0125];
    let mut suite = Suite { sweeps: BTreeMap::new() };
    let start = Instant::now();
    suite.add(scenario("conf1", &torus(2), "conformal", "conf1", 1.0, &grid, ""));
    let conf1_elapsed = start.elapsed().as_secs_f64();
    lines.push(criterion_3(&suite, conf1_elapsed));

    suite.add(scenario("conf2", &torus(2), "conformal", "conf2", 1.0, &grid, "neumann_trials = 100"));
    let pair = format!(
        "[{{ kind = \"flat-torus\", periods = [{TWO_PI}, {TWO_PI}] }}, {{ kind = \"flat-torus\", periods = [{TWO_PI}, {TWO_PI}] }}]"
    );
    suite.add(scenario("conf2-pair", &pair, "conformal", "conf2", 1.0, &grid, ""));
    suite.add(scenario("warped-t2", &torus(2), "warped", "warped", 0.4, &warped_grid, ""));
    suite.add(scenario("warped-t2-long", &torus(2), "warped", "warped", 1.0, &warped_grid, ""));
    suite.add(scenario("warped-t3", &torus(3), "warped", "warped", 0.4, &warped_grid, ""));
    let circle = "[{ kind = \"circle\", radius = 1.0 }]";
    for l in [0.25, 1.0, 4.0] {
        suite.add(scenario(&format!("circle-product-{l}"), circle, "conformal", "identity", l, &[0.1], ""));
    }
    suite.add(scenario("circle-conf1", circle, "conformal", "conf1", 1.0, &[0.1, 0.05], ""));
    suite.add(scenario("circle-warped", circle, "warped", "warped", 1.0, &[0.1, 0.05], ""));
    suite.add(scenario("bumps", &torus(2), "conformal", "identity", 2.0, &[1.0], ""));

    lines.extend(criterion_4(&suite));
    lines.extend(criterion_5(&suite));
    lines.push(criterion_6(&suite));
    lines.push(criterion_7(&suite));
    lines.push(criterion_8(&suite));
    lines.push(criterion_9(&suite));
    lines.push(criterion_10(&suite));
    lines.push(criterion_11(&suite));
    lines.push(criterion_12(&suite));

    let mut failed = 0;
    println!();
    for line in &lines {
        let tag = match line.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Unattainable => "FAIL (unattainable as stated)",
        };
        println!("criterion {:<10} {tag}: {}", line.id, line.detail);
    }
    println!();
    if failed > 0 {
        eprintln!("{failed} acceptance line(s) failed unexpectedly");
        std::process::exit(1);
    }
}
