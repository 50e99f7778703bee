use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use steklov_core::harness::{self, write_atomic, Scenario, ScenarioReport};
use steklov_core::rayleigh::grid::BumpScenario;
use steklov_core::rayleigh::{minmax_upper_bound, psi_family, psi_hypothesis_holds};
use steklov_core::spectrum::{steklov_dirichlet_spectrum, steklov_spectrum};
use steklov_core::{with_worker_pool, ModeProblem, ProblemKind, SpectrumResult};

/// Steklov spectra of warped and conformal cylinders, and the eigenvalue
/// inequalities they are meant to exhibit.
///
/// The worker pool is capped by STEKLOV_LAB_THREADS; log verbosity follows
/// RUST_LOG (default: warn).
#[derive(Parser)]
#[command(name = "steklov-lab", version)]
struct Cli {
    /// Reject ε outside the admissible range of the profile family.
    #[arg(long, global = true)]
    strict_epsilon: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file (TOML).
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    /// Collar test functions, one per boundary component.
    Psi,
    /// Disjoint bumps under the shrinking conformal factor.
    Bumps,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues at one ε.
    Spectrum {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Defaults to the largest ε of the scenario.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(short = 'k', long)]
        count: Option<usize>,
        /// Solve the mixed problem on a collar of this depth instead.
        #[arg(long)]
        collar_depth: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Write here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Dirichlet-to-Neumann matrix of one cross-section mode.
    Dtn {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Spectra over the ε grid, without checks.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Run the scenario's checks; exit status 1 if any fails.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Min-max upper bounds from explicit test functions.
    Rayleigh {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value = "psi")]
        family: FamilyArg,
        /// Scale parameters for the bump family (overrides the scenario).
        #[arg(long, value_delimiter = ',')]
        m: Vec<f64>,
    },
    /// Mesh-refinement study of σ_k without extrapolation.
    Convergence {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(short = 'k', long, default_value_t = 2)]
        index: usize,
        #[arg(long, default_value_t = 4)]
        levels: u32,
    },
}

fn load(arg: &ScenarioArg, strict: bool) -> Result<Scenario> {
    let mut s = Scenario::load(&arg.config).with_context(|| format!("loading {}", arg.config.display()))?;
    if strict {
        s.metric.strict_epsilon = true;
    }
    Ok(s)
}

fn pick_epsilon(s: &Scenario, eps: Option<f64>) -> f64 {
    eps.unwrap_or_else(|| s.epsilons()[0])
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn spectrum_text(res: &SpectrumResult, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => res.to_json()? + "\n",
        Format::Csv => {
            let mut buf = Vec::new();
            res.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
    })
}

fn print_summary(report: &ScenarioReport) {
    for c in &report.checks {
        let failed = c.failures().count();
        println!(
            "{:<18} {}  ({} rows, {} failed)",
            c.check.as_str(),
            if c.pass { "pass" } else { "FAIL" },
            c.rows.len(),
            failed
        );
        for r in c.failures() {
            println!(
                "    ε={:<10} k={:<3} {}: {} vs bound {} (slack {:.3e})",
                r.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
                r.index.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
                r.quantity,
                r.value,
                r.bound,
                r.slack
            );
        }
        for note in &c.notes {
            println!("    note: {note}");
        }
    }
    println!("{}: {}", report.scenario, if report.pass { "all checks pass" } else { "checks failed" });
}

fn run(cli: Cli) -> Result<ExitCode> {
    let strict = cli.strict_epsilon;
    match cli.command {
        Command::Spectrum {
            scenario,
            epsilon,
            count,
            collar_depth,
            format,
            out,
        } => {
            let s = load(&scenario, strict)?;
            let cs = s.cross_section()?;
            let eps = pick_epsilon(&s, epsilon);
            let k = count.unwrap_or(s.solve.count);
            let res = match collar_depth {
                Some(depth) => {
                    steklov_dirichlet_spectrum(&s.request(eps, &cs, ProblemKind::SteklovDirichletCollar { depth }, k)?)?
                }
                None => steklov_spectrum(&s.request(eps, &cs, ProblemKind::SteklovTwoSided, k)?)?,
            };
            emit(out.as_deref(), &spectrum_text(&res, format)?)?;
        }
        Command::Dtn {
            scenario,
            lambda,
            epsilon,
        } => {
            let s = load(&scenario, strict)?;
            let metric = s.metric(pick_epsilon(&s, epsilon))?;
            let mp = ModeProblem::two_sided(lambda, metric)?;
            let mesh = mp.mesh(&s.solve.mesh)?;
            let dtn = mp.dtn_matrix(&mesh)?;
            println!("{}", serde_json::to_string_pretty(&dtn)?);
        }
        Command::Sweep { scenario, out_dir, svg } => {
            let mut s = load(&scenario, strict)?;
            s.output.svg |= svg;
            let points = harness::sweep(&s)?;
            let report = ScenarioReport {
                scenario: s.name.clone(),
                family: s.metric.family,
                profile: s.metric.profile,
                n: s.n()?,
                half_length: s.metric.half_length,
                sweep: points,
                checks: Vec::new(),
                pass: true,
            };
            match out_dir.or_else(|| s.output.dir.as_ref().map(|d| s.base_dir.join(d))) {
                Some(dir) => {
                    for path in report.write_artifacts(&dir, &s.output)? {
                        eprintln!("wrote {}", path.display());
                    }
                }
                None => print!("{}", report.sweep_csv()),
            }
        }
        Command::Verify { scenario, out_dir } => {
            let mut s = load(&scenario, strict)?;
            if let Some(dir) = out_dir {
                s.output.dir = Some(std::path::absolute(dir)?);
            }
            let report = harness::run_scenario(&s)?;
            print_summary(&report);
            if !report.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Rayleigh { scenario, family, m } => {
            let s = load(&scenario, strict)?;
            match family {
                FamilyArg::Psi => {
                    let cs = s.cross_section()?;
                    println!("epsilon,bound,two_over_l,hypothesis");
                    for eps in s.epsilons() {
                        let metric = s.metric(eps)?;
                        let b = minmax_upper_bound(&psi_family(&metric, &cs)?, &metric)?;
                        println!("{eps},{},{},{}", b.bound, 2.0 / s.metric.half_length, psi_hypothesis_holds(&metric));
                    }
                }
                FamilyArg::Bumps => {
                    let Some(periods) = s.torus_periods() else {
                        bail!("the bump family needs a single flat 2-torus cross-section");
                    };
                    let cfg = &s.checks.small_eigenvalues;
                    let sc = BumpScenario {
                        periods,
                        half_length: s.metric.half_length,
                        ball_radius: cfg.ball_radius,
                        bumps: cfg.bumps,
                        resolution: cfg.resolution,
                        bump_elements: cfg.bump_elements,
                    };
                    let ms = if m.is_empty() { cfg.m.clone() } else { m };
                    println!("m,k,bound,error_bar");
                    for m in ms {
                        let b = sc.problem(m)?.upper_bound(cfg.refinements)?;
                        for (j, v) in b.eigenvalues.iter().enumerate() {
                            let err = b.error_bar.map(|e| e.to_string()).unwrap_or_default();
                            println!("{m},{},{v},{err}", j + 1);
                        }
                    }
                }
            }
        }
        Command::Convergence {
            scenario,
            epsilon,
            index,
            levels,
        } => {
            let s = load(&scenario, strict)?;
            if levels < 2 {
                bail!("--levels must be at least 2 to estimate an order");
            }
            let cs = s.cross_section()?;
            let eps = pick_epsilon(&s, epsilon);
            let mut values = Vec::new();
            println!("level,max_width,sigma,observed_order");
            for level in 0..levels {
                let mut req = s.request(eps, &cs, ProblemKind::SteklovTwoSided, index)?.with_richardson(false);
                req.mesh = req.mesh.refined(level);
                let sigma = steklov_spectrum(&req)?.sigma_index(index)?;
                values.push(sigma);
                let order = match values.len() {
                    n if n >= 3 => {
                        let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
                        ((a - b) / (b - c)).abs().log2().to_string()
                    }
                    _ => String::new(),
                };
                let width = req.mode_problem(0.0)?.mesh(&req.mesh)?.max_width();
                println!("{level},{width},{sigma},{order}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match with_worker_pool(|| run(cli)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
