//! Static log-log plot of tail curves.

use std::fmt::Write as _;

use uclt_core::empirics::{CurveKind, TailCurve};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const FLOOR: f64 = 1e-8;

pub fn tail_plot(curves: &[&TailCurve], title: &str) -> String {
    let pts = |c: &TailCurve| -> Vec<(f64, f64)> {
        c.u_grid
            .iter()
            .zip(&c.probs)
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, p)| (u.log10(), p.max(FLOOR).log10()))
            .collect()
    };
    let all: Vec<(f64, f64)> = curves.iter().flat_map(|c| pts(c)).collect();
    let (x0, x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
    let y0 = all.iter().map(|p| p.1).fold(0.0, f64::min).min(-1.0);
    let y1 = 0.0;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">log10 u</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">log10 P(sup |phi| &gt; u)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let colour = match c.kind {
            CurveKind::Empirical => "#1f4e9c",
            CurveKind::UpperBound => "#b22222",
            CurveKind::LowerBound => "#2e8b57",
        };
        let path: Vec<String> = pts(c)
            .iter()
            .enumerate()
            .map(|(j, &(x, y))| format!("{}{:.2} {:.2}", if j == 0 { 'M' } else { 'L' }, sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<path d="{}" stroke="{colour}" stroke-width="1.5" fill="none"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - MARGIN - 110.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            c.kind
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
