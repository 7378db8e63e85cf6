//! CSV tables, a minimal SVG line chart, and atomic file writes.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! every value reads back bit-for-bit and identical inputs give identical
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::independence::IndependenceReport;
use crate::wlln::{frequency_curve, SimulationReport};

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest round-trip form. Very small or very large magnitudes use
/// exponent notation, and negative zero is written as `0`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// A CSV document built row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<String> = fields.iter().map(|f| csv_field(f.as_ref())).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// `scenario,n,rep,sample_mean,in_band`
pub fn samples_csv(reports: &[SimulationReport]) -> Csv {
    let mut csv = Csv::new(&["scenario", "n", "rep", "sample_mean", "in_band"]);
    for r in reports {
        for s in &r.samples {
            csv.row(&[
                r.scenario.clone(),
                s.n.to_string(),
                s.rep.to_string(),
                num(s.sample_mean),
                s.in_band.to_string(),
            ]);
        }
    }
    csv
}

/// One row of a frequency curve table.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub scenario: String,
    pub n: usize,
    pub frequency: Option<f64>,
    pub exact_lower_prob: Option<f64>,
}

/// Curve rows of simulation reports, in report order.
pub fn curve_rows(reports: &[SimulationReport]) -> Vec<CurveRow> {
    reports
        .iter()
        .flat_map(|r| {
            frequency_curve(r).into_iter().map(|p| CurveRow {
                scenario: r.scenario.clone(),
                n: p.n,
                frequency: Some(p.frequency),
                exact_lower_prob: None,
            })
        })
        .collect()
}

/// `scenario,n,frequency` plus `exact_lower_prob` when `with_exact` is set.
/// Missing values are left empty.
pub fn curves_csv(rows: &[CurveRow], with_exact: bool) -> Csv {
    let mut header = vec!["scenario", "n", "frequency"];
    if with_exact {
        header.push("exact_lower_prob");
    }
    let mut csv = Csv::new(&header);
    for r in rows {
        let mut fields = vec![
            r.scenario.clone(),
            r.n.to_string(),
            r.frequency.map(num).unwrap_or_default(),
        ];
        if with_exact {
            fields.push(r.exact_lower_prob.map(num).unwrap_or_default());
        }
        csv.row(&fields);
    }
    csv
}

/// `scenario,n,exact_lower_prob`
pub fn exact_csv(rows: &[CurveRow]) -> Csv {
    let mut csv = Csv::new(&["scenario", "n", "exact_lower_prob"]);
    for r in rows {
        csv.row(&[
            r.scenario.clone(),
            r.n.to_string(),
            r.exact_lower_prob.map(num).unwrap_or_default(),
        ]);
    }
    csv
}

/// `kind,lhs,rhs,holds,max_gap,witness`
pub fn independence_csv(reports: &[IndependenceReport]) -> Csv {
    let mut csv = Csv::new(&["kind", "lhs", "rhs", "holds", "max_gap", "witness"]);
    for r in reports {
        csv.row(&[
            r.kind.name().to_string(),
            num(r.lhs),
            num(r.rhs),
            r.holds.to_string(),
            num(r.max_gap),
            r.witness.clone().unwrap_or_default(),
        ]);
    }
    csv
}

/// A named series of `(x, y)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG line chart with `y` fixed to `[0, 1]`. Every point
/// gets a circle marker, so a one-point series still shows up.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 160.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x0 == x1 {
        (x0, x1) = (x0 - 1.0, x1 + 1.0);
    }
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        xml_escape(title)
    );
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=4 {
        let y = k as f64 / 4.0;
        let (gy, x_end, lx, ly) = (py(y), LEFT + plot_w, LEFT - 6.0, py(y) + 4.0);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{gy}" x2="{x_end}" y2="{gy}" stroke="#ddd"/><text x="{lx}" y="{ly}" text-anchor="end">{y}</text>"##
        );
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for &x in &ticks {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + plot_h + 16.0,
            x
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        H - 10.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + plot_h / 2.0,
        xml_escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if ser.points.len() > 1 {
            let pts: Vec<String> = ser
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            W - RIGHT + 14.0,
            ly - 10.0,
            W - RIGHT + 32.0,
            ly,
            xml_escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes through a temporary file in the same directory, then renames it
/// over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
