use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::diagnostics::{CoverageCurve, PLOT_CAP};
use crate::error::{Error, Result};

/// Shortest round-trip decimal; infinities as `inf` / `-inf`.
pub fn format_number(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// `episode,mean,lo,hi` with episodes numbered from 1.
pub fn curve_csv(curve: &CoverageCurve) -> String {
    let mut out = String::from("episode,mean,lo,hi\n");
    let (lo, hi) = (curve.lo(), curve.hi());
    for t in 0..curve.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t + 1,
            format_number(curve.mean[t]),
            format_number(lo[t]),
            format_number(hi[t])
        );
    }
    out
}

/// One column per trial.
pub fn trials_csv(curves: &[Vec<f64>]) -> String {
    let mut out = String::from("episode");
    for i in 0..curves.len() {
        let _ = write!(out, ",trial_{i}");
    }
    out.push('\n');
    let len = curves.first().map_or(0, Vec::len);
    for t in 0..len {
        let _ = write!(out, "{}", t + 1);
        for c in curves {
            let _ = write!(out, ",{}", format_number(c[t]));
        }
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One line of a chart with its band.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgSeries {
    pub label: String,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SvgSeries {
    pub fn from_curve(label: &str, curve: &CoverageCurve) -> Self {
        Self {
            label: label.into(),
            mean: curve.mean.clone(),
            lo: curve.lo(),
            hi: curve.hi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
}

impl Default for ChartStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "episode".into(),
            y_label: String::new(),
            width: 640.0,
            height: 400.0,
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn plot_value(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-PLOT_CAP, PLOT_CAP)
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with shaded bands, axes and a legend. Output depends only on
/// the input, byte for byte.
pub fn render_svg(series: &[SvgSeries], style: &ChartStyle) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.mean.is_empty()) {
        return Err(Error::InvalidParams("nothing to plot".into()));
    }
    for s in series {
        if s.lo.len() != s.mean.len() || s.hi.len() != s.mean.len() {
            return Err(Error::LengthMismatch {
                expected: s.mean.len(),
                found: s.lo.len().min(s.hi.len()),
            });
        }
    }
    let n = series.iter().map(|s| s.mean.len()).max().unwrap_or(1);
    let values = series.iter().flat_map(|s| s.lo.iter().chain(&s.hi).chain(&s.mean)).map(|&v| plot_value(v));
    let (mut y_min, mut y_max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let (w, h) = (style.width, style.height);
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |t: usize| MARGIN_LEFT + if n > 1 { plot_w * t as f64 / (n - 1) as f64 } else { plot_w / 2.0 };
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (plot_value(v) - y_min) / (y_max - y_min));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(&style.title)
    );

    // Axes and ticks.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2},{MARGIN_TOP:.2} L{x0:.2},{y0:.2} L{:.2},{y0:.2}" fill="none" stroke="black"/>"#,
        x0 + plot_w
    );
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    for i in 0..=4 {
        let t = if n > 1 { (n - 1) * i / 4 } else { 0 };
        let x = x_of(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, t + 1);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        x0 + plot_w / 2.0,
        h - 10.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&style.y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for t in 0..s.hi.len() {
            let _ = write!(band, "{:.2},{:.2} ", x_of(t), y_of(s.hi[t]));
        }
        for t in (0..s.lo.len()).rev() {
            let _ = write!(band, "{:.2},{:.2} ", x_of(t), y_of(s.lo[t]));
        }
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for (t, &v) in s.mean.iter().enumerate() {
            let _ = write!(line, "{:.2},{:.2} ", x_of(t), y_of(v));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.trim_end()
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let x = x0 + plot_w - 130.0;
        let _ = writeln!(
            out,
            r#"<g class="legend"><line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> SvgSeries {
        SvgSeries {
            label: "flat".into(),
            mean: vec![1.0; 5],
            lo: vec![1.0; 5],
            hi: vec![1.0; 5],
        }
    }

    #[test]
    fn single_flat_curve() {
        let svg = render_svg(&[flat()], &ChartStyle::default()).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn two_curves_two_bands_two_legend_entries() {
        let mut other = flat();
        other.label = "other".into();
        other.mean = vec![0.0, 1.0, 2.0, 3.0, f64::INFINITY];
        other.lo = other.mean.iter().map(|m| m - 0.5).collect();
        other.hi = other.mean.iter().map(|m| m + 0.5).collect();
        let svg = render_svg(&[flat(), other], &ChartStyle::default()).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render_svg(&[], &ChartStyle::default()).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = CoverageCurve {
            trials: 2,
            mean: vec![1.0, f64::INFINITY],
            band: vec![0.5, 0.0],
        };
        assert_eq!(curve_csv(&c), "episode,mean,lo,hi\n1,1,0.5,1.5\n2,inf,inf,inf\n");
        assert_eq!(trials_csv(&[vec![1.0, 2.0], vec![0.25, 3.0]]), "episode,trial_0,trial_1\n1,1,0.25\n2,2,3\n");
    }
}
