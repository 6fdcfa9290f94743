use std::fmt::Write;

use crate::bounds::RateFit;
use crate::mesh_fem::Mesh;
use crate::pde_models::ControlField;

const W: f64 = 520.0;
const H: f64 = 380.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn decade_range(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a - 1.0, b + 1.0)
    } else {
        (a, b)
    }
}

/// Log-log plot of per-size means with standard-error bars and the fitted line.
pub fn rate_plot_svg(metric: &str, points: &[(f64, f64, f64)], fit: Option<&RateFit>) -> String {
    let pos: Vec<(f64, f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(n, m, _)| n > 0.0 && m > 0.0 && m.is_finite())
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{metric}</text>"#,
        W / 2.0
    );
    if pos.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">no positive means</text></svg>"#,
            W / 2.0,
            H / 2.0
        );
        return s;
    }
    let nmin = pos.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let nmax = pos.iter().map(|p| p.0).fold(0.0, f64::max);
    let vmin = pos
        .iter()
        .map(|p| if p.1 - p.2 > 0.0 { p.1 - p.2 } else { p.1 })
        .fold(f64::INFINITY, f64::min);
    let vmax = pos.iter().map(|p| p.1 + p.2).fold(0.0, f64::max);
    let (x0, x1) = decade_range(nmin, nmax);
    let (y0, y1) = decade_range(vmin, vmax);
    let px = |n: f64| LEFT + (n.log10() - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (v.log10() - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"##,
            H - BOTTOM,
            H - BOTTOM + 18.0
        );
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">N</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    if let Some(f) = fit {
        let (a, b) = (10f64.powf(x0), 10f64.powf(x1));
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
            px(a),
            py(f.predict(a)).clamp(TOP, H - BOTTOM),
            px(b),
            py(f.predict(b)).clamp(TOP, H - BOTTOM)
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" fill="#c0392b">slope {:.3}, r² {:.3}</text>"##,
            LEFT + 10.0,
            TOP + 18.0,
            f.slope,
            f.r_squared
        );
    }
    for &(n, m, se) in &pos {
        let lo = if m - se > 0.0 { m - se } else { m };
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#2c3e50"/><circle cx="{x:.2}" cy="{:.2}" r="4" fill="#2c3e50"/>"##,
            py(lo),
            py(m + se),
            py(m),
            x = px(n)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn color(v: f64, lower: f64, upper: f64) -> String {
    // white at zero, red toward the upper bound, blue toward the lower bound
    let t = if v >= 0.0 {
        if upper > 0.0 { (v / upper).min(1.0) } else { 0.0 }
    } else if lower < 0.0 {
        -(v / lower).min(1.0)
    } else {
        0.0
    };
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("#ff{:02x}{:02x}", fade(t), fade(t))
    } else {
        format!("#{:02x}{:02x}ff", fade(t), fade(t))
    }
}

/// Heatmap of a piecewise-constant control, one polygon per cell.
pub fn control_heatmap_svg(mesh: &Mesh, u: &ControlField, lower: f64, upper: f64, title: &str) -> String {
    let size = 480.0;
    let (pad, top) = (20.0, 40.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = size + 2.0 * pad,
        h = size + top + pad + 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        pad + size / 2.0
    );
    let nodes = mesh.nodes();
    for (c, cell) in mesh.cells().iter().enumerate() {
        let mut pts = String::new();
        for &k in cell {
            let [x, y] = nodes[k];
            let _ = write!(pts, "{:.3},{:.3} ", pad + x * size, top + (1.0 - y) * size);
        }
        let fill = color(u.values[c], lower, upper);
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#,
            pts.trim_end()
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}">blue = {lower}, white = 0, red = {upper}</text>"#,
        top + size + 20.0
    );
    s.push_str("</svg>\n");
    s
}
