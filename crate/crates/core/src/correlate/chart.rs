//! Dual-axis SVG line chart, format version 1.
//!
//! ```text
//! <?xml version="1.0" encoding="UTF-8"?>
//! <!-- aerotrace chart v1 -->
//! <svg xmlns=... width="960" height="420" viewBox="0 0 960 420">
//!   <title>
//!   <rect class="plot">                     plot area
//!   <g class="axis x">      line + (line, text) per tick
//!   <g class="axis left">   vehicles/h, data-min/data-max
//!   <g class="axis right">  PM2.5 (normalized), data-min/data-max
//!   <polyline class="series vehicles" data-points="n">
//!   <polyline class="series pm25" data-points="n">
//!   <g class="legend">      one (line, text) per series
//!   <text class="caption">  joined hours, best lag when any
//! </svg>
//! ```
//!
//! Coordinates are printed with two decimals, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;

use super::{best_lag, JoinedSeries, LagCorrelation};

pub const CHART_HEADER: &str = "<!-- aerotrace chart v1 -->";

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const TICKS_Y: usize = 5;
const MAX_TICKS_X: usize = 8;
const VEHICLE_COLOR: &str = "#1f77b4";
const PM_COLOR: &str = "#d62728";

struct Axis {
    min: f64,
    max: f64,
}

impl Axis {
    fn covering(values: &[f64], floor: f64, ceil: f64) -> Self {
        let lo = values.iter().copied().fold(floor, f64::min);
        let hi = values.iter().copied().fold(ceil, f64::max);
        Self {
            min: lo,
            max: if hi > lo { hi } else { lo + 1.0 },
        }
    }

    /// Vertical pixel position of `v`.
    fn y(&self, v: f64) -> f64 {
        let plot_h = HEIGHT - TOP - BOTTOM;
        TOP + plot_h * (1.0 - (v - self.min) / (self.max - self.min))
    }
}

fn x_of(i: usize, n: usize) -> f64 {
    let plot_w = WIDTH - LEFT - RIGHT;
    if n <= 1 {
        LEFT + plot_w / 2.0
    } else {
        LEFT + plot_w * i as f64 / (n - 1) as f64
    }
}

fn polyline(out: &mut String, class: &str, color: &str, values: &[f64], axis: &Axis) {
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i, values.len()), axis.y(v)))
        .collect();
    let _ = writeln!(
        out,
        r#"  <polyline class="series {class}" data-points="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        values.len(),
        points.join(" ")
    );
}

fn y_axis(out: &mut String, side: &str, label: &str, color: &str, axis: &Axis) {
    let (x, tick_dx, anchor) = if side == "left" {
        (LEFT, -6.0, "end")
    } else {
        (WIDTH - RIGHT, 6.0, "start")
    };
    let _ = writeln!(
        out,
        r#"  <g class="axis {side}" data-min="{:.2}" data-max="{:.2}" stroke="{color}">"#,
        axis.min, axis.max
    );
    let _ = writeln!(
        out,
        r#"    <line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
        HEIGHT - BOTTOM
    );
    for k in 0..=TICKS_Y {
        let v = axis.min + (axis.max - axis.min) * k as f64 / TICKS_Y as f64;
        let y = axis.y(v);
        let _ = writeln!(
            out,
            r#"    <line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
            x + tick_dx
        );
        let _ = writeln!(
            out,
            r#"    <text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="11" stroke="none" fill="{color}">{v:.2}</text>"#,
            x + 2.0 * tick_dx,
            y + 4.0
        );
    }
    let lx = if side == "left" { 18.0 } else { WIDTH - 18.0 };
    let ly = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
    let _ = writeln!(
        out,
        r#"    <text x="{lx:.2}" y="{ly:.2}" transform="rotate(-90 {lx:.2} {ly:.2})" text-anchor="middle" font-size="12" stroke="none" fill="{color}">{label}</text>"#
    );
    let _ = writeln!(out, "  </g>");
}

/// The chart as a standalone SVG document.
pub fn render_chart(joined: &JoinedSeries, lags: &[LagCorrelation]) -> String {
    let n = joined.len();
    let left = Axis::covering(joined.vehicles(), 0.0, 0.0);
    let right = Axis::covering(joined.pm25(), 0.0, 1.0);
    let bottom = HEIGHT - BOTTOM;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, "{CHART_HEADER}");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "  <title>Vehicles per hour and PM2.5</title>");
    let _ = writeln!(
        out,
        r##"  <rect class="plot" x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999999"/>"##,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );

    let _ = writeln!(out, r##"  <g class="axis x" stroke="#444444">"##);
    let _ = writeln!(
        out,
        r#"    <line x1="{LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}"/>"#,
        WIDTH - RIGHT
    );
    let every = n.div_ceil(MAX_TICKS_X).max(1);
    for i in (0..n).step_by(every) {
        let x = x_of(i, n);
        let _ = writeln!(
            out,
            r#"    <line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
            bottom + 6.0
        );
        let _ = writeln!(
            out,
            r##"    <text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11" stroke="none" fill="#444444">{}</text>"##,
            bottom + 20.0,
            joined.hours()[i].format("%m-%d %H:00")
        );
    }
    let _ = writeln!(out, "  </g>");

    y_axis(&mut out, "left", "vehicles / h", VEHICLE_COLOR, &left);
    y_axis(&mut out, "right", "PM2.5 (normalized)", PM_COLOR, &right);
    polyline(
        &mut out,
        "vehicles",
        VEHICLE_COLOR,
        joined.vehicles(),
        &left,
    );
    polyline(&mut out, "pm25", PM_COLOR, joined.pm25(), &right);

    let _ = writeln!(out, r#"  <g class="legend" font-size="12">"#);
    for (k, (label, color)) in [("vehicles", VEHICLE_COLOR), ("PM2.5", PM_COLOR)]
        .iter()
        .enumerate()
    {
        let x = LEFT + 10.0 + 120.0 * k as f64;
        let _ = writeln!(
            out,
            r#"    <line x1="{x:.2}" y1="20.00" x2="{:.2}" y2="20.00" stroke="{color}" stroke-width="2"/>"#,
            x + 24.0
        );
        let _ = writeln!(
            out,
            r#"    <text x="{:.2}" y="24.00" fill="{color}">{label}</text>"#,
            x + 30.0
        );
    }
    let _ = writeln!(out, "  </g>");

    let caption = match best_lag(lags) {
        Some(b) => format!(
            "{n} joined hours; best lag {} h (r = {:.3}, n = {})",
            b.lag, b.r, b.n
        ),
        None => format!("{n} joined hours"),
    };
    let _ = writeln!(
        out,
        r##"  <text class="caption" x="{LEFT:.2}" y="{:.2}" font-size="12" fill="#444444">{caption}</text>"##,
        HEIGHT - 20.0
    );
    out.push_str("</svg>\n");
    out
}
