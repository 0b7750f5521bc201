//! Self-contained SVG plots of result tables: line, scatter and heatmap.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::table::{Cell, ResultTable, TableError};

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("plot `{plot}`: {source}")]
    Table { plot: String, source: TableError },
    #[error("plot `{0}`: a heatmap needs exactly one `y` column and a `z` column")]
    HeatmapShape(String),
    #[error("plot `{0}`: needs at least one `y` column")]
    NoSeries(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Line,
    Scatter,
    Heatmap,
}

/// Which columns to draw. One SVG is written per distinct combination of
/// the `facet` columns; `series` splits every `y` column by its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    /// File stem.
    pub name: String,
    pub kind: PlotKind,
    /// `"nodes"` for the per-node table of an allocation run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub x: String,
    pub y: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub facet: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Renders `spec` against `table`; returns `(file name, svg)` pairs in facet order.
pub fn emit_plot(table: &ResultTable, spec: &PlotSpec) -> Result<Vec<(String, String)>, PlotError> {
    let err = |source| PlotError::Table { plot: spec.name.clone(), source };
    if spec.y.is_empty() {
        return Err(PlotError::NoSeries(spec.name.clone()));
    }
    let mut needed = vec![spec.x.as_str()];
    needed.extend(spec.y.iter().map(String::as_str));
    needed.extend(spec.z.as_deref());
    needed.extend(spec.series.as_deref());
    needed.extend(spec.facet.iter().map(String::as_str));
    for c in &needed {
        table.column_index(c).map_err(err)?;
    }
    let facet_idx: Vec<usize> = spec.facet.iter().map(|c| table.column_index(c)).collect::<Result<_, _>>().map_err(err)?;
    let mut groups: Vec<(Vec<Cell>, Vec<usize>)> = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let key: Vec<Cell> = facet_idx.iter().map(|&c| row[c].clone()).collect();
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (key, rows) in groups {
        let suffix: String = spec.facet.iter().zip(&key).map(|(c, v)| format!("_{c}-{}", v.label())).collect();
        let caption: Vec<String> = spec.facet.iter().zip(&key).map(|(c, v)| format!("{c} = {}", v.label())).collect();
        let title = match (&spec.title, caption.is_empty()) {
            (Some(t), true) => t.clone(),
            (Some(t), false) => format!("{t} ({})", caption.join(", ")),
            (None, _) => caption.join(", "),
        };
        let svg = match spec.kind {
            PlotKind::Line | PlotKind::Scatter => xy_plot(table, spec, &rows, &title).map_err(err)?,
            PlotKind::Heatmap => heatmap(table, spec, &rows, &title)?,
        };
        out.push((format!("{}{suffix}.svg", spec.name), svg));
    }
    Ok(out)
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn number(table: &ResultTable, row: usize, col: usize) -> Option<f64> {
    table.rows[row][col].as_f64().filter(|v| v.is_finite())
}

fn xy_plot(table: &ResultTable, spec: &PlotSpec, rows: &[usize], title: &str) -> Result<String, TableError> {
    let xc = table.column_index(&spec.x)?;
    let sc = spec.series.as_deref().map(|s| table.column_index(s)).transpose()?;
    let mut series: Vec<Series> = Vec::new();
    for y in &spec.y {
        let yc = table.column_index(y)?;
        let mut split: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for &r in rows {
            let (Some(x), Some(v)) = (number(table, r, xc), number(table, r, yc)) else { continue };
            let label = match sc {
                Some(c) => format!("{y} ({} = {})", spec.series.as_deref().unwrap_or(""), table.rows[r][c].label()),
                None => y.clone(),
            };
            match split.iter_mut().find(|s| s.0 == label) {
                Some(s) => s.1.push((x, v)),
                None => split.push((label, vec![(x, v)])),
            }
        }
        for (label, mut points) in split {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            series.push(Series { label, points });
        }
    }
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x_axis, y_axis) = (Axis::fit(xs), Axis::fit(ys));
    let y_label = if spec.y.len() == 1 { spec.y[0].clone() } else { "value".to_string() };
    let mut svg = frame(title, &spec.x, &y_label);
    axes(&mut svg, &x_axis, &y_axis);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| (x_axis.px(x), y_axis.py(y))).collect();
        if spec.kind == PlotKind::Line && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in &pts {
            marker(&mut svg, k, x, y, color);
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 14.0;
        marker(&mut svg, k, lx + 6.0, ly - 4.0, color);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#, lx + 16.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn marker(svg: &mut String, k: usize, x: f64, y: f64, color: &str) {
    if k % 2 == 0 {
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.8" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
    } else {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="5.2" height="5.2" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            x - 2.6,
            y - 2.6
        );
    }
}

fn heatmap(table: &ResultTable, spec: &PlotSpec, rows: &[usize], title: &str) -> Result<String, PlotError> {
    let (Some(z), [y]) = (spec.z.as_deref(), spec.y.as_slice()) else {
        return Err(PlotError::HeatmapShape(spec.name.clone()));
    };
    let err = |source| PlotError::Table { plot: spec.name.clone(), source };
    let (xc, yc, zc) = (
        table.column_index(&spec.x).map_err(err)?,
        table.column_index(y).map_err(err)?,
        table.column_index(z).map_err(err)?,
    );
    let mut cells: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let key = |v: f64| v.to_bits() ^ (1 << 63);
    for &r in rows {
        if let (Some(x), Some(yv), Some(zv)) = (number(table, r, xc), number(table, r, yc), number(table, r, zc)) {
            cells.insert((key(x), key(yv)), zv);
        }
    }
    let distinct = |f: fn(&(u64, u64)) -> u64| {
        let mut v: Vec<f64> = cells.keys().map(|k| f64::from_bits(f(k) ^ (1 << 63))).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = distinct(|k| k.0);
    let ys = distinct(|k| k.1);
    let (lo, hi) = cells.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut svg = frame(title, &spec.x, y);
    let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let (cw, ch) = (w / xs.len().max(1) as f64, h / ys.len().max(1) as f64);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &yv) in ys.iter().enumerate() {
            let Some(&v) = cells.get(&(key(x), key(yv))) else { continue };
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
                LEFT + i as f64 * cw,
                TOP + h - (j + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3,
                colormap(t),
                escape(&format!("{} = {x}, {y} = {yv}, {z} = {v}", spec.x))
            );
        }
    }
    let every = |len: usize| len.div_ceil(10).max(1);
    for (i, &x) in xs.iter().enumerate().filter(|(i, _)| i % every(xs.len()) == 0) {
        let px = LEFT + (i as f64 + 0.5) * cw;
        let _ = writeln!(svg, r#"<text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#, TOP + h + 16.0, tick_label(x, 0.0));
    }
    for (j, &yv) in ys.iter().enumerate().filter(|(j, _)| j % every(ys.len()) == 0) {
        let py = TOP + h - (j as f64 + 0.5) * ch;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#, LEFT - 6.0, py + 4.0, tick_label(yv, 0.0));
    }
    let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{w:.1}" height="{h:.1}" fill="none" stroke="black"/>"#);
    // colour bar
    let bx = WIDTH - RIGHT + 24.0;
    for s in 0..50 {
        let t = s as f64 / 49.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + h - (s + 1) as f64 * h / 50.0,
            h / 50.0 + 0.3,
            colormap(t)
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, bx + 22.0, TOP + h, tick_label(lo, 0.0));
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, bx + 22.0, TOP + 10.0, tick_label(hi, 0.0));
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, bx, TOP - 8.0, escape(z));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Blue to yellow through green.
fn colormap(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * hi.abs().max(1e-300) {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let raw = (hi - lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
        Self { lo: (lo / step).floor() * step, hi: (hi / step).ceil() * step, step }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.lo) / (self.hi - self.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.lo) / (self.hi - self.lo) * (HEIGHT - TOP - BOTTOM)
    }

    fn ticks(&self) -> Vec<f64> {
        let k = ((self.hi - self.lo) / self.step).round() as i64;
        (0..=k).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let decimals = if step > 0.0 { (-step.log10().floor()).max(0.0) as usize } else { 4 };
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label)
    );
    svg
}

fn axes(svg: &mut String, x: &Axis, y: &Axis) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(svg, r#"<rect x="{x0}" y="{y1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(svg, r##"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{y0}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#, y0 + 16.0, tick_label(t, x.step));
    }
    for t in y.ticks() {
        let py = y.py(t);
        let _ = writeln!(svg, r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, x0 - 6.0, py + 4.0, tick_label(t, y.step));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new(["m", "delta", "beta", "alpha_hat", "alpha_u"]);
        for m in [2usize, 10] {
            for (k, d) in [0.2, 0.5, 0.8].into_iter().enumerate() {
                let row = vec![m.into(), d.into(), 0.8.into(), (1.0 - d).into(), (1.0 - d + 0.01 * (m + k) as f64).into()];
                t.push(row).unwrap();
            }
        }
        t
    }

    fn spec(kind: PlotKind) -> PlotSpec {
        PlotSpec {
            name: "p".into(),
            kind,
            table: None,
            x: "delta".into(),
            y: vec!["alpha_hat".into(), "alpha_u".into()],
            z: None,
            series: None,
            facet: vec!["m".into()],
            title: Some("decay <rates>".into()),
        }
    }

    #[test]
    fn one_svg_per_facet() {
        let out = emit_plot(&table(), &spec(PlotKind::Line)).unwrap();
        assert_eq!(out.iter().map(|o| o.0.as_str()).collect::<Vec<_>>(), ["p_m-2.svg", "p_m-10.svg"]);
        for (_, svg) in &out {
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert_eq!(svg.matches("<polyline").count(), 2);
            assert!(svg.contains("decay &lt;rates&gt;"));
            assert!(!svg.contains("href"));
        }
    }

    #[test]
    fn heatmap_draws_every_cell() {
        let mut s = spec(PlotKind::Heatmap);
        s.y = vec!["beta".into()];
        s.z = Some("alpha_u".into());
        let out = emit_plot(&table(), &s).unwrap();
        assert_eq!(out[0].1.matches("<title>").count(), 3);
        s.y.push("m".into());
        assert!(matches!(emit_plot(&table(), &s), Err(PlotError::HeatmapShape(_))));
    }

    #[test]
    fn missing_column_is_reported() {
        let mut s = spec(PlotKind::Scatter);
        s.y = vec!["nope".into()];
        assert!(matches!(
            emit_plot(&table(), &s),
            Err(PlotError::Table { source: TableError::MissingColumn(c), .. }) if c == "nope"
        ));
    }
}
