use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CheckName, OutputConfig, SweepPoint};
use crate::error::{Error, Result};
use crate::profile::{Family, ProfileLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub epsilon: Option<f64>,
    pub index: Option<usize>,
    pub quantity: String,
    pub value: f64,
    pub bound: f64,
    /// Positive when the inequality holds with room to spare.
    pub slack: f64,
    pub pass: bool,
}

impl CheckRow {
    /// `value ≥ bound - tol`.
    pub fn lower(epsilon: Option<f64>, index: Option<usize>, quantity: &str, value: f64, bound: f64, tol: f64) -> Self {
        CheckRow {
            epsilon,
            index,
            quantity: quantity.into(),
            value,
            bound,
            slack: value - bound,
            pass: value >= bound - tol,
        }
    }

    /// `value ≤ bound + tol`.
    pub fn upper(epsilon: Option<f64>, index: Option<usize>, quantity: &str, value: f64, bound: f64, tol: f64) -> Self {
        CheckRow {
            epsilon,
            index,
            quantity: quantity.into(),
            value,
            bound,
            slack: bound - value,
            pass: value <= bound + tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: CheckName,
    pub rows: Vec<CheckRow>,
    pub constants: BTreeMap<String, Constant>,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: CheckName) -> Self {
        CheckReport {
            check,
            rows: Vec::new(),
            constants: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn constant(&mut self, name: &str, value: f64, formula: &str) -> f64 {
        log::info!("{}: {name} = {value} ({formula})", self.check);
        self.constants.insert(
            name.into(),
            Constant {
                value,
                formula: formula.into(),
            },
        );
        value
    }

    pub fn row(&mut self, row: CheckRow) {
        self.rows.push(row);
    }

    pub fn finish(mut self) -> Self {
        self.pass = self.rows.iter().all(|r| r.pass);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub family: Family,
    pub profile: ProfileLabel,
    pub n: usize,
    pub half_length: f64,
    pub sweep: Vec<SweepPoint>,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config("output.dir", format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per `(ε, k)`.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("epsilon,k,sigma,volume,boundary_distance\n");
        for p in &self.sweep {
            for (k, s) in p.sigma.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", p.epsilon, k + 1, s, p.volume, p.boundary_distance);
            }
        }
        out
    }

    pub fn checks_csv(&self) -> String {
        let mut out = String::from("check,epsilon,index,quantity,value,bound,slack,pass\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.checks {
            for r in &c.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    c.check,
                    opt(r.epsilon.map(|e| e.to_string())),
                    opt(r.index.map(|k| k.to_string())),
                    r.quantity,
                    r.value,
                    r.bound,
                    r.slack,
                    r.pass
                );
            }
        }
        out
    }

    /// Log-log plot of `σ_k` against ε for the first few positive indices.
    pub fn svg(&self, max_curves: usize) -> Result<String> {
        let mut series: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
        let kmax = self.sweep.iter().map(|p| p.sigma.len()).min().unwrap_or(0);
        for k in 0..kmax {
            let pts: Vec<(f64, f64)> = self
                .sweep
                .iter()
                .filter(|p| p.sigma[k] > 0.0)
                .map(|p| (p.epsilon, p.sigma[k]))
                .collect();
            if pts.len() == self.sweep.len() && !pts.is_empty() {
                series.push((k + 1, pts));
            }
            if series.len() == max_curves {
                break;
            }
        }
        let all = series.iter().flat_map(|(_, p)| p.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if series.is_empty() {
            return Err(Error::NotApplicable("no positive eigenvalues to plot".into()));
        }
        let pad = |lo: f64, hi: f64| if hi > lo { (lo / 1.2, hi * 1.2) } else { (lo / 2.0, hi * 2.0) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        let mut buf = String::new();
        {
            let root = SVGBackend::with_string(&mut buf, (720, 480)).into_drawing_area();
            let plot_err = |e: String| Error::NotApplicable(format!("plotting failed: {e}"));
            root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("{}: σ_k against ε", self.scenario), ("sans-serif", 18))
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
                .map_err(|e| plot_err(e.to_string()))?;
            chart
                .configure_mesh()
                .x_desc("ε")
                .y_desc("σ_k")
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
            for (i, (k, pts)) in series.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                chart
                    .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                    .map_err(|e| plot_err(e.to_string()))?
                    .label(format!("σ_{k}"))
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
                chart
                    .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                    .map_err(|e| plot_err(e.to_string()))?;
            }
            chart
                .configure_series_labels()
                .border_style(BLACK)
                .background_style(WHITE.mix(0.8))
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
            root.present().map_err(|e| plot_err(e.to_string()))?;
        }
        Ok(buf)
    }

    /// Write the enabled artifacts into `dir`; returns the written paths.
    pub fn write_artifacts(&self, dir: &Path, cfg: &OutputConfig) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
            let path = dir.join(format!("{}.{name}", self.scenario));
            write_atomic(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        if cfg.csv {
            put("sweep.csv", self.sweep_csv().as_bytes())?;
            put("checks.csv", self.checks_csv().as_bytes())?;
        }
        if cfg.json {
            put("report.json", self.to_json()?.as_bytes())?;
        }
        if cfg.svg {
            match self.svg(4) {
                Ok(svg) => put("sigma.svg", svg.as_bytes())?,
                Err(e) => log::warn!("skipping plot: {e}"),
            }
        }
        Ok(written)
    }
}
