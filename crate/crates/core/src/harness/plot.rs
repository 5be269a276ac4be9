//! Fitness curves as a standalone SVG document.
//!
//! Red: champion fitness. Blue: mean fitness. Green: mean plus one standard
//! deviation. The x axis spans `[0, generations)`.

use std::fmt::Write as _;
use std::path::Path;

use super::{io_err, GenerationRow, HarnessError};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// The three plotted series, taken verbatim from the CSV columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub generations: Vec<usize>,
    pub champion: Vec<f64>,
    pub mean: Vec<f64>,
    pub mean_plus_std: Vec<f64>,
}

impl PlotSeries {
    pub fn from_rows(rows: &[GenerationRow]) -> Self {
        Self {
            generations: rows.iter().map(|r| r.generation).collect(),
            champion: rows.iter().map(|r| r.champion_fitness).collect(),
            mean: rows.iter().map(|r| r.mean_fitness).collect(),
            mean_plus_std: rows.iter().map(|r| r.mean_fitness + r.std_fitness).collect(),
        }
    }

    /// Half-open x domain `[0, n)`.
    pub fn x_domain(&self) -> (f64, f64) {
        (0.0, self.generations.last().map_or(1.0, |&g| g as f64 + 1.0))
    }

    /// y domain covering every value, at least the full fitness range [0, 64].
    pub fn y_domain(&self) -> (f64, f64) {
        let values = self.champion.iter().chain(&self.mean).chain(&self.mean_plus_std);
        let (lo, hi) = values.fold((0.0f64, 64.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        (lo.floor(), hi.ceil())
    }
}

fn nice_step(span: f64, ticks: f64) -> f64 {
    let raw = span / ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

pub fn render_svg(series: &PlotSeries, title: &str) -> String {
    let (x0, x1) = series.x_domain();
    let (y0, y1) = series.y_domain();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + plot_w / 2.0, escape(title));

    // axes
    let (bx, by) = (sx(x0), sy(y0));
    let _ = writeln!(svg, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, sx(x1));
    let _ = writeln!(svg, r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{}" stroke="black"/>"#, sy(y1));
    let xstep = nice_step(x1 - x0, 10.0).max(1.0);
    let mut x = x0;
    while x < x1 {
        let px = sx(x);
        let _ = writeln!(svg, r#"<line x1="{px}" y1="{by}" x2="{px}" y2="{}" stroke="black"/>"#, by + 5.0);
        let _ = writeln!(svg, r#"<text x="{px}" y="{}" text-anchor="middle">{x}</text>"#, by + 18.0);
        x += xstep;
    }
    let ystep = nice_step(y1 - y0, 8.0);
    let mut y = y0;
    while y <= y1 + 1e-9 {
        let py = sy(y);
        let _ = writeln!(svg, r##"<line x1="{bx}" y1="{py}" x2="{}" y2="{py}" stroke="#dddddd"/>"##, sx(x1));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y}</text>"#, bx - 8.0, py + 4.0);
        y += ystep;
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">Generation</text>"#, LEFT + plot_w / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">Fitness</text>"#,
        cy = TOP + plot_h / 2.0
    );

    let lines = [
        ("champion", "red", "Champion", &series.champion),
        ("mean", "blue", "Mean", &series.mean),
        ("mean_plus_std", "green", "Mean + 1 SD", &series.mean_plus_std),
    ];
    for (k, (id, color, label, values)) in lines.iter().enumerate() {
        let mut points = String::new();
        for (&g, &v) in series.generations.iter().zip(values.iter()) {
            let _ = write!(points, "{:.2},{:.2} ", sx(g as f64), sy(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline id="{id}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, lx + 26.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the fitness plot of `rows` to `path`.
pub fn emit_plot(rows: &[GenerationRow], title: &str, path: &Path) -> Result<PlotSeries, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyRun(path.display().to_string()));
    }
    let series = PlotSeries::from_rows(rows);
    std::fs::write(path, render_svg(&series, title)).map_err(io_err(path))?;
    Ok(series)
}
