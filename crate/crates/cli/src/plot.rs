//! SVG view of a trajectory CSV: one path per agent with start and end markers, and the
//! final pairwise distances.

use std::collections::BTreeMap;
use std::path::Path;

use svg::node::element::path::Data;
use svg::node::element::{Circle, Line, Path as SvgPath, Rectangle, Text};
use svg::Document;

use crate::error::{CliError, Result};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Planar positions per agent in step order. One-dimensional agents are drawn against the
/// step index.
pub type Paths = BTreeMap<usize, Vec<(f64, f64)>>;

pub fn read_paths(csv_text: &str) -> Result<Paths> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| CliError::Csv(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (step_col, agent_col, x_col) = match (col("step"), col("agent"), col("p_x")) {
        (Some(s), Some(a), Some(x)) => (s, a, x),
        _ => return Err(CliError::Csv("expected columns `step`, `agent` and `p_x`".into())),
    };
    let y_col = col("p_y");
    let mut paths = Paths::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Csv(e.to_string()))?;
        let field = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Csv(format!("row {}: bad value in column {}", line + 2, &headers[c])))
        };
        let agent = field(agent_col)? as usize;
        let x = field(x_col)?;
        let y = match y_col.map(|c| rec.get(c).unwrap_or("")) {
            Some(s) if !s.is_empty() => field(y_col.unwrap())?,
            _ => field(step_col)?,
        };
        paths.entry(agent).or_default().push((x, y));
    }
    if paths.is_empty() {
        return Err(CliError::Csv("no trajectory rows".into()));
    }
    Ok(paths)
}

pub fn render(paths: &Paths) -> Document {
    let pts = paths.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |(x, y): (f64, f64)| (MARGIN + (x - x0) * scale, SIZE - MARGIN - (y - y0) * scale);

    let mut doc = Document::new()
        .set("viewBox", (0, 0, SIZE, SIZE))
        .set("width", SIZE)
        .set("height", SIZE)
        .add(Rectangle::new().set("width", SIZE).set("height", SIZE).set("fill", "white"));
    for (k, (agent, path)) in paths.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let (sx, sy) = map(path[0]);
        let mut data = Data::new().move_to((sx, sy));
        for &p in &path[1..] {
            data = data.line_to(map(p));
        }
        let (ex, ey) = map(*path.last().expect("paths are non-empty"));
        doc = doc
            .add(SvgPath::new().set("d", data).set("fill", "none").set("stroke", color).set("stroke-width", 1.5))
            .add(Circle::new().set("cx", sx).set("cy", sy).set("r", 4).set("fill", "none").set("stroke", color))
            .add(Rectangle::new().set("x", ex - 4.0).set("y", ey - 4.0).set("width", 8).set("height", 8).set("fill", color))
            .add(Text::new(format!("{agent}")).set("x", ex + 6.0).set("y", ey - 6.0).set("font-size", 12).set("fill", color));
    }
    let finals: Vec<_> = paths.values().map(|p| *p.last().expect("paths are non-empty")).collect();
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            let (a, b) = (finals[i], finals[j]);
            let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            let (ax, ay) = map(a);
            let (bx, by) = map(b);
            doc = doc
                .add(
                    Line::new()
                        .set("x1", ax).set("y1", ay).set("x2", bx).set("y2", by)
                        .set("stroke", "#888").set("stroke-dasharray", "4 3"),
                )
                .add(
                    Text::new(format!("{dist:.3}"))
                        .set("x", 0.5 * (ax + bx))
                        .set("y", 0.5 * (ay + by))
                        .set("font-size", 11)
                        .set("fill", "#444"),
                );
        }
    }
    doc
}

/// Reads a trajectory CSV and writes the SVG; nothing is written on error.
pub fn emit_plot(input: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let doc = render(&read_paths(&text)?);
    svg::save(output, &doc).map_err(|e| CliError::io(output, e))
}
