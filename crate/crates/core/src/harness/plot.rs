//! Self-contained SVG line charts.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("trace has no '{0}' column")]
    MissingColumn(&'static str),
    #[error("trace line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("nothing to plot")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Draws the series; with `log_log` both axes are log10 and non-positive
/// points are dropped.
pub fn line_chart(series: &[Series], title: &str, x_label: &str, y_label: &str, log_log: bool) -> Result<String, PlotError> {
    let tx = |v: f64| if log_log { v.log10() } else { v };
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_log || (*x > 0.0 && *y > 0.0)))
                .map(|&(x, y)| (tx(x), tx(y)))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = mapped.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(PlotError::Empty);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let label = |v: f64| {
        if log_log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3}")
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            bottom + 16.0,
            label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (idx, (s, pts)) in series.iter().zip(&mapped).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[idx % COLORS.len()];
        let mut d = String::new();
        for (j, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { "M" } else { "L" }, px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            d.trim_end()
        );
        if pts.len() <= 20 {
            for &(x, y) in pts {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
            }
        }
        let ly = top + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            left + 10.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Running regret curves from a trace CSV (first agent's rows).
pub fn trace_series(csv: &str) -> Result<Vec<Series>, PlotError> {
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header = reader.headers().map_err(|_| PlotError::Empty)?.clone();
    if header.is_empty() {
        return Err(PlotError::Empty);
    }
    let col = |name: &'static str| header.iter().position(|h| h == name).ok_or(PlotError::MissingColumn(name));
    let (k_col, agent_col, sc_col, dc_col) = (col("k")?, col("agent")?, col("sc_regret")?, col("dc_regret")?);
    let mut sc = Vec::new();
    let mut dc = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let bad = |reason: &str| PlotError::BadRow {
            line: idx + 2,
            reason: reason.to_string(),
        };
        let fields = row.map_err(|e| bad(&e.to_string()))?;
        if &fields[agent_col] != "1" {
            continue;
        }
        let k: f64 = fields[k_col].parse().map_err(|_| bad("k is not a number"))?;
        let s: f64 = fields[sc_col].parse().map_err(|_| bad("sc_regret is not a number"))?;
        sc.push((k, s));
        if !fields[dc_col].is_empty() {
            let d: f64 = fields[dc_col].parse().map_err(|_| bad("dc_regret is not a number"))?;
            dc.push((k, d));
        }
    }
    if sc.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut out = vec![Series {
        name: "static regret".into(),
        points: sc,
    }];
    if !dc.is_empty() {
        out.push(Series {
            name: "dynamic regret".into(),
            points: dc,
        });
    }
    Ok(out)
}

pub fn plot_trace(csv: &str) -> Result<String, PlotError> {
    line_chart(&trace_series(csv)?, "Running regret", "round k", "regret", false)
}
