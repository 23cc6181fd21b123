//! Tables, CSV emission and a small SVG line plotter.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::AppResult;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // 17 significant digits
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Vec<f64> {
        let i = self.column_index(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn to_csv(&self, experiment: &str, cfg: &ExperimentConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# experiment: {experiment}");
        let _ = writeln!(out, "# table: {}", self.name);
        let _ = writeln!(out, "# schema_version: {SCHEMA_VERSION}");
        let _ = writeln!(out, "# config_sha256: {}", cfg.hash());
        let _ = writeln!(out, "# seed: {}", cfg.seed);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Outcome of one assertion made by an experiment. Non-gating checks are
/// reported but do not fail `--check`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub gating: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, gating: true, detail: detail.into() }
    }

    pub fn informational(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { gating: false, ..Self::new(name, passed, detail) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub table: usize,
    pub x: String,
    pub y: Vec<String>,
    /// Column splitting rows into separate curves.
    pub series: Option<String>,
    pub log_y: bool,
    pub title: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: String,
    pub tables: Vec<Table>,
    pub report: Vec<String>,
    pub checks: Vec<Check>,
    pub plot: Option<PlotSpec>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_gating_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    /// Writes the first table to `path` and the others next to it as
    /// `<stem>-<table>.csv`. Returns the written paths.
    pub fn write_csv(&self, path: &Path, cfg: &ExperimentConfig) -> AppResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (i, table) in self.tables.iter().enumerate() {
            let target = if i == 0 { path.to_path_buf() } else { sibling(path, &table.name, "csv") };
            let mut f = std::fs::File::create(&target)?;
            f.write_all(table.to_csv(&self.experiment, cfg).as_bytes())?;
            written.push(target);
        }
        Ok(written)
    }

    pub fn write_svg(&self, path: &Path) -> AppResult<Option<PathBuf>> {
        let Some(spec) = &self.plot else { return Ok(None) };
        let target = path.with_extension("svg");
        std::fs::write(&target, render_svg(&self.tables[spec.table], spec))?;
        Ok(Some(target))
    }
}

fn sibling(path: &Path, name: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}-{name}.{ext}"))
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Line plot with axes, extreme tick labels and a legend.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let xi = table.column_index(&spec.x).expect("x column");
    let si = spec.series.as_ref().and_then(|s| table.column_index(s));
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for y in &spec.y {
        let yi = table.column_index(y).expect("y column");
        for row in &table.rows {
            let (Some(x), Some(mut v)) = (row[xi].as_f64(), row[yi].as_f64()) else { continue };
            if spec.log_y {
                if v <= 0.0 {
                    continue;
                }
                v = v.log10();
            }
            if !x.is_finite() || !v.is_finite() {
                continue;
            }
            let label = match si {
                Some(i) => format!("{y} {}={}", spec.series.as_deref().unwrap_or(""), row[i].render_short()),
                None => y.clone(),
            };
            match curves.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((x, v)),
                None => curves.push((label, vec![(x, v)])),
            }
        }
    }
    let pts = curves.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let ylab = |v: f64| if spec.log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&spec.title));
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{m}" y="{}" text-anchor="middle">{x0:.3}</text>"#, h - m + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(&spec.x));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, h - m, ylab(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, m + 4.0, ylab(y1));
    for (k, (label, pts)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = m + 14.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - m - 150.0, w - m - 130.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - m - 125.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

impl Cell {
    fn render_short(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v}"),
            other => other.render(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("main", &["x", "y", "group"]);
        t.push(vec![Cell::Int(1), 0.5.into(), "a".into()]);
        t.push(vec![Cell::Int(2), 0.25.into(), "a".into()]);
        t.push(vec![Cell::Int(1), 1.0.into(), "b".into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let cfg = ExperimentConfig::default();
        let csv = sample().to_csv("demo", &cfg);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# experiment: demo");
        assert!(lines[3].starts_with("# config_sha256: "));
        assert_eq!(lines[5], "x,y,group");
        assert_eq!(lines[6], "1,5.0000000000000000e-1,a");
        let v: f64 = lines[7].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn float_rendering_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e12] {
            let s = Cell::Float(v).render();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let spec = PlotSpec {
            table: 0,
            x: "x".into(),
            y: vec!["y".into()],
            series: Some("group".into()),
            log_y: true,
            title: "demo".into(),
        };
        let svg = render_svg(&sample(), &spec);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
