//! Plain SVG figures: the distribution of one feature's `U` samples, and
//! per-metric comparison bars from a sweep.

use std::fmt::Write as _;

use crate::attribution::{FeatureDistributionSummary, Kde};
use crate::evalharness::SweepResult;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - y / self.y1 * (H - TOP - BOTTOM)
    }
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/><line x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>"#,
        W - RIGHT
    );
    for k in 0..=4 {
        let x = frame.x0 + (frame.x1 - frame.x0) * f64::from(k) / 4.0;
        let y = frame.y1 * f64::from(k) / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            frame.px(x),
            by + 16.0,
            tick(x),
            bx - 4.0,
            frame.py(y) + 4.0,
            tick(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text><text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(x_label),
        (TOP + by) / 2.0,
        (TOP + by) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str, dash: bool) {
    let d: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y.min(frame.y1))))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="2"{} points="{}"/>"#,
        if dash { r#" stroke-dasharray="6 4""# } else { "" },
        d.join(" ")
    );
}

/// Histogram of the nonzero `U` samples on a density scale, with the KDE
/// and a Gaussian of matching mean and SD overlaid. The zero mass is shown
/// as a separate annotation rather than a bar.
pub fn distribution_svg(name: &str, values: &[f64], summary: &FeatureDistributionSummary) -> String {
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    let mut out = String::new();
    header(&mut out, &format!("{name}: bootstrap distribution of U (B = {})", values.len()));
    let note = format!("P0 = {:.2}% zero runs", 100.0 * summary.p_zero);
    if nonzero.len() < 2 {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{note}; too few nonzero values to plot</text></svg>"#, W / 2.0, H / 2.0);
        return out;
    }

    let lo = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nonzero.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = nonzero.len() as f64;
    let mean = nonzero.iter().sum::<f64>() / m;
    let sd = (nonzero.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt();
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    let (x0, x1) = (lo - pad, hi + pad);

    let bins = (m.sqrt().ceil() as usize).clamp(5, 40);
    let width = (hi - lo).max(f64::MIN_POSITIVE) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &nonzero {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (m * width)).collect();

    let grid: Vec<f64> = (0..=200).map(|k| x0 + (x1 - x0) * f64::from(k) / 200.0).collect();
    let kde: Option<Vec<(f64, f64)>> = Kde::fit(&nonzero)
        .ok()
        .map(|k| grid.iter().map(|&x| (x, k.density(x))).collect());
    let gauss: Option<Vec<(f64, f64)>> = (sd > 0.0).then(|| {
        grid.iter()
            .map(|&x| {
                let z = (x - mean) / sd;
                (x, (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()))
            })
            .collect()
    });
    let peak = heights
        .iter()
        .copied()
        .chain(kde.iter().flatten().map(|p| p.1))
        .chain(gauss.iter().flatten().map(|p| p.1))
        .fold(0.0, f64::max);
    let frame = Frame { x0, x1, y1: peak * 1.1 };

    axes(&mut out, &frame, "U (nonzero runs)", "density");
    for (b, &h) in heights.iter().enumerate() {
        let a = lo + b as f64 * width;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9db4d6" stroke="white"/>"##,
            frame.px(a),
            frame.py(h),
            (frame.px(a + width) - frame.px(a)).max(0.5),
            frame.py(0.0) - frame.py(h)
        );
    }
    let mut legend = vec![("histogram", "#9db4d6", false)];
    if let Some(k) = &kde {
        polyline(&mut out, &frame, k, "#c44e52", false);
        legend.push(("KDE", "#c44e52", false));
    }
    if let Some(g) = &gauss {
        polyline(&mut out, &frame, g, "#222222", true);
        legend.push(("Gaussian fit", "#222222", true));
    }
    for (k, (label, color, dash)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="{}"{}/><text x="{}" y="{}">{label}</text>"#,
            W - 170.0,
            W - 150.0,
            if *label == "histogram" { 8 } else { 2 },
            if *dash { r#" stroke-dasharray="6 4""# } else { "" },
            W - 145.0,
            y + 4.0
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{note}</text>"#, W - 170.0, TOP + 10.0 + 16.0 * legend.len() as f64 + 4.0);
    out.push_str("</svg>\n");
    out
}

/// One bar per method for `metric`: mean over the swept `k`, with +-1 SD
/// error bars.
pub fn sweep_svg(result: &SweepResult, metric: &str) -> String {
    let rows: Vec<_> = result.rows.iter().filter(|r| r.metric == metric).collect();
    let mut out = String::new();
    header(&mut out, &format!("{metric}: mean over k (error bars: 1 SD)"));
    if rows.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let top = rows.iter().map(|r| r.mean + r.sd).fold(0.0, f64::max);
    let frame = Frame {
        x0: 0.0,
        x1: rows.len() as f64,
        y1: if top > 0.0 { top * 1.1 } else { 1.0 },
    };
    axes(&mut out, &frame, "method", metric);
    for (k, r) in rows.iter().enumerate() {
        let center = k as f64 + 0.5;
        let (a, b) = (frame.px(center - 0.3), frame.px(center + 0.3));
        let _ = writeln!(
            out,
            r#"<rect x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            frame.py(r.mean),
            b - a,
            frame.py(0.0) - frame.py(r.mean),
            PALETTE[k % PALETTE.len()]
        );
        let cx = frame.px(center);
        let (ylo, yhi) = (frame.py((r.mean - r.sd).max(0.0)), frame.py(r.mean + r.sd));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{ylo:.2}" x2="{cx:.2}" y2="{yhi:.2}" stroke="black"/><line x1="{:.2}" y1="{yhi:.2}" x2="{:.2}" y2="{yhi:.2}" stroke="black"/><line x1="{:.2}" y1="{ylo:.2}" x2="{:.2}" y2="{ylo:.2}" stroke="black"/>"#,
            cx - 6.0,
            cx + 6.0,
            cx - 6.0,
            cx + 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 30.0,
            escape(&r.method)
        );
    }
    out.push_str("</svg>\n");
    out
}
