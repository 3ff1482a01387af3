//! Static SVG 1.1 line charts of trace channels.

use std::io::Write;

use crate::error::Result;
use crate::signal::SeriesLabel;
use crate::trace::MultiChannelTrace;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const MAX_POINTS_PER_LINE: usize = 2000;

fn color_for(label: SeriesLabel) -> &'static str {
    use crate::trace::Channel::*;
    match label {
        SeriesLabel::Single(FluidL) => "#c62828",
        SeriesLabel::Single(FluidR) => "#1565c0",
        SeriesLabel::Single(Air1) => "#2e7d32",
        SeriesLabel::Single(Air2) => "#9e9d24",
        SeriesLabel::Single(Env) => "#6a1b9a",
        SeriesLabel::Diff => "#e65100",
    }
}

fn values_for(trace: &MultiChannelTrace, label: SeriesLabel) -> Vec<f64> {
    match label {
        SeriesLabel::Single(ch) => trace.channel(ch).to_vec(),
        SeriesLabel::Diff => trace.differential().values,
    }
}

/// Write an SVG polyline chart of the selected series.
pub fn write_svg_plot(
    trace: &MultiChannelTrace,
    labels: &[SeriesLabel],
    mut out: impl Write,
) -> Result<()> {
    let series: Vec<(SeriesLabel, Vec<f64>)> =
        labels.iter().map(|&l| (l, values_for(trace, l))).collect();

    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, values) in &series {
        for &v in values {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_min.is_finite() || y_min == y_max {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let (t_min, t_max) = (trace.start_time, trace.end_time());

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |t: f64| MARGIN_LEFT + (t - t_min) / (t_max - t_min) * plot_w;
    let y_of = |v: f64| MARGIN_TOP + (y_max - v) / (y_max - y_min) * plot_h;

    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    )?;
    writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    )?;

    // Axes with five ticks each.
    writeln!(
        out,
        "  <g stroke=\"#444\" stroke-width=\"1\" fill=\"none\">\n    \
         <line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\"/>\n    \
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\"/>\n  </g>",
        x0 = MARGIN_LEFT,
        x1 = WIDTH - MARGIN_RIGHT,
        y0 = MARGIN_TOP,
        y1 = HEIGHT - MARGIN_BOTTOM,
    )?;
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let t = t_min + frac * (t_max - t_min);
        let v = y_min + frac * (y_max - y_min);
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#444\">{:.0}</text>",
            x_of(t),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            t
        )?;
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#444\">{:.4}</text>",
            MARGIN_LEFT - 6.0,
            y_of(v) + 4.0,
            v
        )?;
    }
    writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#444\">time, s</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    )?;
    writeln!(
        out,
        "  <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#444\" \
         transform=\"rotate(-90 16 {:.1})\">temperature, C</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )?;

    let stride = (trace.len() / MAX_POINTS_PER_LINE).max(1);
    for (label, values) in &series {
        write!(
            out,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"",
            color_for(*label)
        )?;
        for (i, &v) in values.iter().enumerate().step_by(stride) {
            write!(out, "{:.1},{:.1} ", x_of(trace.time(i)), y_of(v))?;
        }
        writeln!(out, "\"/>")?;
    }

    // Legend, one swatch per series.
    for (slot, (label, _)) in series.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 + 16.0 * slot as f64;
        writeln!(
            out,
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{}\"/>",
            WIDTH - MARGIN_RIGHT - 110.0,
            y - 4.0,
            color_for(*label)
        )?;
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#222\">{}</text>",
            WIDTH - MARGIN_RIGHT - 92.0,
            y,
            label
        )?;
    }

    writeln!(out, "</svg>")?;
    Ok(())
}
