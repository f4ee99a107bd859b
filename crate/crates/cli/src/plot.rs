//! SVG time-series panels with power-law guide lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinmagic::analysis::{default_fit_window, fit_power_law, observable, read_records, FitResult, TimeSeriesRecord};

use crate::error::{io_err, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Loglog,
    Linear,
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Loglog => "loglog",
            Scale::Linear => "linear",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Observables to draw; every observable except the site profile when empty.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default = "default_scales")]
    pub scales: Vec<Scale>,
    #[serde(default = "default_fit_t_min")]
    pub fit_t_min: f64,
    #[serde(default)]
    pub fit_t_max: Option<f64>,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            out_dir: default_out_dir(),
            observables: Vec::new(),
            scales: default_scales(),
            fit_t_min: default_fit_t_min(),
            fit_t_max: None,
            width: default_width(),
            height: default_height(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("plots")
}
fn default_scales() -> Vec<Scale> {
    vec![Scale::Loglog, Scale::Linear]
}
fn default_fit_t_min() -> f64 {
    2.0
}
fn default_width() -> u32 {
    640
}
fn default_height() -> u32 {
    440
}

impl PlotSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: PlotSpec = toml::from_str(text).map_err(|e| CliError::PlotSpec(e.to_string()))?;
        if spec.scales.is_empty() {
            return Err(CliError::PlotSpec("scales must not be empty".into()));
        }
        if spec.width < 100 || spec.height < 100 {
            return Err(CliError::PlotSpec("width and height must be at least 100".into()));
        }
        Ok(spec)
    }
}

/// One curve within a panel.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<FitResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub observable: String,
    pub index: Option<i64>,
    pub len: Option<usize>,
    pub curves: Vec<Curve>,
}

impl Panel {
    fn file_stem(&self) -> String {
        let mut s = self.observable.clone();
        if let Some(i) = self.index {
            let _ = write!(s, "_{i}");
        }
        if let Some(l) = self.len {
            let _ = write!(s, "_L{l}");
        }
        s
    }

    fn title(&self) -> String {
        let mut s = self.observable.clone();
        if let Some(i) = self.index {
            let _ = write!(s, " (index {i})");
        }
        if let Some(l) = self.len {
            let _ = write!(s, ", L = {l}");
        }
        s
    }
}

fn curve_label(r: &TimeSeriesRecord) -> String {
    let mut s = format!("Jz={} h={}", r.jz, r.h);
    if let Some(c) = r.chi {
        let _ = write!(s, " chi={c}");
    }
    if let Some(c) = r.chi_replica {
        let _ = write!(s, " chi_r={c}");
    }
    s
}

/// Groups ensemble-level rows into one panel per (observable, index, L).
pub fn build_panels(records: &[TimeSeriesRecord], spec: &PlotSpec) -> Vec<Panel> {
    let wanted: Vec<String> = if spec.observables.is_empty() {
        records
            .iter()
            .filter(|r| r.observable != observable::Z)
            .map(|r| r.observable.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        spec.observables.clone()
    };
    let mut panels = Vec::new();
    for obs in &wanted {
        type Key = (Option<i64>, usize);
        let mut groups: BTreeMap<Key, BTreeMap<String, Vec<(f64, f64)>>> = BTreeMap::new();
        for r in records.iter().filter(|r| &r.observable == obs && r.realization.is_none()) {
            groups
                .entry((r.index, r.len))
                .or_default()
                .entry(curve_label(r))
                .or_default()
                .push((r.time, r.value));
        }
        if groups.is_empty() {
            panels.push(Panel {
                observable: obs.clone(),
                index: None,
                len: None,
                curves: Vec::new(),
            });
            continue;
        }
        for ((index, len), curves) in groups {
            let curves = curves
                .into_iter()
                .map(|(label, mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let window = match spec.fit_t_max {
                        Some(t) => Some((spec.fit_t_min, t)),
                        None => default_fit_window(&points, spec.fit_t_min),
                    };
                    let fit = window.and_then(|w| fit_power_law(&points, w).ok());
                    Curve { label, points, fit }
                })
                .collect();
            panels.push(Panel {
                observable: obs.clone(),
                index,
                len: Some(len),
                curves,
            });
        }
    }
    if panels.is_empty() {
        panels.push(Panel {
            observable: "empty".into(),
            index: None,
            len: None,
            curves: Vec::new(),
        });
    }
    panels
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    /// Position in [0, 1], or `None` when not representable.
    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v > 0.0 {
                v.log10()
            } else {
                return None;
            }
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i32, self.hi as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let dec = (-step.log10().floor()).max(0.0) as usize;
            let mut out = Vec::new();
            let mut v = (self.lo / step).ceil() * step;
            while v <= self.hi + 1e-9 * step {
                let v0 = if v.abs() < 1e-12 * step { 0.0 } else { v };
                out.push((v0, format!("{v0:.dec$}")));
                v += step;
            }
            out
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.1}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one panel. Output is a pure function of the inputs.
pub fn render_panel(panel: &Panel, scale: Scale, width: u32, height: u32) -> String {
    let log = scale == Scale::Loglog;
    let (w, h) = (width as f64, height as f64);
    let (left, right, top, bottom) = (70.0, 20.0, 36.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let xs = Axis::new(panel.curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)), log);
    let ys = Axis::new(panel.curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)), log);
    let px = |t: f64| xs.frac(t).map(|f| left + f * pw);
    let py = |v: f64| ys.frac(v).map(|f| top + (1.0 - f) * ph);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} [{}]</text>"#,
        fmt_num(w / 2.0),
        escape(&panel.title()),
        scale.name()
    );
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><rect x="{}" y="{}" width="{}" height="{}"/></g>"#,
        fmt_num(left),
        fmt_num(top),
        fmt_num(pw),
        fmt_num(ph)
    );
    let _ = writeln!(s, r#"<g class="ticks">"#);
    for (v, label) in xs.ticks() {
        if let Some(x) = px(v) {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{0:.1}" x2="{x:.1}" y2="{1:.1}" stroke="black"/><text x="{x:.1}" y="{2:.1}" text-anchor="middle">{label}</text>"#,
                top + ph,
                top + ph + 5.0,
                top + ph + 18.0
            );
        }
    }
    for (v, label) in ys.ticks() {
        if let Some(y) = py(v) {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="black"/><text x="{1:.1}" y="{2:.1}" text-anchor="end">{label}</text>"#,
                left - 5.0,
                left - 8.0,
                y + 4.0
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#,
        fmt_num(left + pw / 2.0),
        fmt_num(h - 12.0)
    );

    for (ci, c) in panel.curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let pts: Vec<(f64, f64)> = c.points.iter().filter_map(|&(t, v)| Some((px(t)?, py(v)?))).collect();
        if !pts.is_empty() {
            let mut d = String::new();
            for (i, (x, y)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
            }
            let _ = writeln!(
                s,
                r#"<path class="series" d="{d}" stroke="{color}" fill="none" stroke-width="1.5"/>"#
            );
        }
        if let Some(f) = &c.fit {
            let (t0, t1) = f.window;
            let model = |t: f64| (f.intercept + f.exponent * t.ln()).exp();
            let n = 24;
            let mut d = String::new();
            let mut started = false;
            for i in 0..=n {
                let t = if log {
                    t0 * (t1 / t0).powf(i as f64 / n as f64)
                } else {
                    t0 + (t1 - t0) * i as f64 / n as f64
                };
                if let (Some(x), Some(y)) = (px(t), py(model(t))) {
                    let _ = write!(d, "{}{x:.2},{y:.2}", if started { " L" } else { "M" });
                    started = true;
                }
            }
            if started {
                let _ = writeln!(
                    s,
                    r#"<path class="guide" d="{d}" stroke="{color}" stroke-dasharray="6 4" fill="none"/>"#
                );
            }
        }
        let label = match &c.fit {
            Some(f) => format!("{} slope {:.2} ± {:.2}", c.label, f.exponent, f.exponent_error),
            None => c.label.clone(),
        };
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{}" y="{}" fill="{color}">{}</text>"#,
            fmt_num(left + 8.0),
            fmt_num(top + 16.0 + 15.0 * ci as f64),
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Reads `records`, renders every panel in every scale into `spec.out_dir`.
pub fn plot(records_path: &Path, spec: &PlotSpec) -> Result<Vec<PathBuf>> {
    let f = fs::File::open(records_path).map_err(io_err(records_path))?;
    let records = read_records(std::io::BufReader::new(f))?;
    plot_records(&records, spec)
}

pub fn plot_records(records: &[TimeSeriesRecord], spec: &PlotSpec) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let mut written = Vec::new();
    for panel in build_panels(records, spec) {
        for &scale in &spec.scales {
            let path = spec.out_dir.join(format!("{}_{}.svg", panel.file_stem(), scale.name()));
            fs::write(&path, render_panel(&panel, scale, spec.width, spec.height)).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
