//! Static SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn tick_label(&self, u: f64) -> String {
        let v = self.lo + u * (self.hi - self.lo);
        if self.log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3}")
        }
    }
}

fn px(ax: &Axis, v: f64) -> Option<f64> {
    ax.frac(v).map(|f| LEFT + f * (W - LEFT - RIGHT))
}

fn py(ay: &Axis, v: f64) -> Option<f64> {
    ay.frac(v).map(|f| H - BOTTOM - f * (H - TOP - BOTTOM))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, ax: Option<&Axis>, ay: &Axis) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for k in 0..=4 {
        let u = k as f64 / 4.0;
        let y = y1 - u * (y1 - y0);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, ay.tick_label(u));
        if let Some(ax) = ax {
            let x = x0 + u * (x1 - x0);
            let _ = writeln!(out, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, y1 + 16.0, ax.tick_label(u));
        }
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, labels: &[String]) {
    for (k, label) in labels.iter().enumerate() {
        let y = TOP + 14.0 * k as f64 + 6.0;
        let x = W - RIGHT + 10.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 8.0, PALETTE[k % PALETTE.len()]);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(label));
    }
}

/// Polylines with markers.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, log_y: bool, series: &[Series]) -> String {
    let ax = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), false);
    let ay = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log_y);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, Some(&ax), &ay);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some((px(&ax, x)?, py(&ay, y)?)))
            .collect();
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        for (x, y) in pts {
            let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
        }
    }
    legend(&mut out, &series.iter().map(|s| s.label.clone()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Log-log scatter with an optional `y = x` reference line.
pub fn scatter(title: &str, x_label: &str, y_label: &str, series: &[Series], diagonal: bool) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.0, p.1]));
    let ax = Axis::fit(all(), true);
    let ay = Axis::fit(all(), true);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, Some(&ax), &ay);
    if diagonal {
        let (lo, hi) = (10f64.powf(ax.lo), 10f64.powf(ax.hi));
        if let (Some(x0), Some(y0), Some(x1), Some(y1)) = (px(&ax, lo), py(&ay, lo), px(&ax, hi), py(&ay, hi)) {
            let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y1:.1}" stroke="gray" stroke-dasharray="4 3"/>"#);
        }
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for &(x, y) in &s.points {
            if let (Some(x), Some(y)) = (px(&ax, x), py(&ay, y)) {
                let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2.5" fill="{color}" fill-opacity="0.6"/>"#);
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.label.clone()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Five-number summary: minimum, lower quartile, median, upper quartile, maximum.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

pub fn boxplot(title: &str, y_label: &str, log_y: bool, groups: &[(String, Vec<f64>)]) -> String {
    let stats: Vec<Option<[f64; 5]>> = groups
        .iter()
        .map(|(_, v)| {
            let v: Vec<f64> = if log_y { v.iter().copied().filter(|x| *x > 0.0).collect() } else { v.clone() };
            five_numbers(&v)
        })
        .collect();
    let ay = Axis::fit(stats.iter().flatten().flat_map(|s| s.iter().copied()), log_y);
    let mut out = String::new();
    frame(&mut out, title, "", y_label, None, &ay);
    let slot = (W - LEFT - RIGHT) / groups.len().max(1) as f64;
    for (k, ((label, _), st)) in groups.iter().zip(&stats).enumerate() {
        let cx = LEFT + slot * (k as f64 + 0.5);
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            H - BOTTOM + 14.0,
            escape(label)
        );
        let Some(s) = st else { continue };
        let y: Vec<f64> = s.iter().map(|&v| py(&ay, v).unwrap_or(H - BOTTOM)).collect();
        let half = (slot * 0.3).min(20.0);
        let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#, y[0], y[4]);
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.5" stroke="black"/>"#,
            cx - half,
            y[3],
            2.0 * half,
            (y[1] - y[3]).max(0.5)
        );
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#, cx - half, y[2], cx + half, y[2]);
    }
    out.push_str("</svg>\n");
    out
}
