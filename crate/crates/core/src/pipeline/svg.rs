//! Static SVG renderings of the figure CSVs. SLR is drawn as red
//! triangles, GAMLSS as blue circles, acceptance bands in grey.

use std::fmt::Write;

use super::report::QqFigureGroup;
use crate::diagnostics::ExceedanceTable;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const SLR_COLOUR: &str = "#d62728";
const GAMLSS_COLOUR: &str = "#1f77b4";
const BAND_COLOUR: &str = "#bdbdbd";

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn frame(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
            W / 2.0,
            escape(title),
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN,
            W / 2.0,
            H - 12.0,
            escape(xlabel),
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        for i in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                self.px(fx),
                H - MARGIN + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 6.0,
                self.py(fy) + 4.0,
                tick(fy)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() < 1e-12 {
        "0".into()
    } else if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn circle(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{GAMLSS_COLOUR}"/>"#);
}

fn triangle(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(
        out,
        r#"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="{SLR_COLOUR}"/>"#,
        x,
        y - 4.5,
        x - 4.0,
        y + 3.0,
        x + 4.0,
        y + 3.0
    );
}

fn legend(out: &mut String, left: bool) {
    let x = if left { MARGIN + 16.0 } else { W - MARGIN - 110.0 };
    let y = MARGIN + 16.0;
    circle(out, x, y);
    let _ = writeln!(out, r#"<text x="{}" y="{}">GAMLSS</text>"#, x + 10.0, y + 4.0);
    triangle(out, x, y + 18.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">SLR</text>"#, x + 10.0, y + 22.0);
}

/// Exceedance percentage per age bin with the binomial acceptance band.
pub fn exceedance_svg(title: &str, gamlss: &ExceedanceTable, slr: &ExceedanceTable) -> String {
    let rows = &gamlss.rows;
    let x0 = rows.first().map_or(0.0, |r| r.age_lo);
    let x1 = rows.last().map_or(1.0, |r| r.age_hi);
    let ymax = rows
        .iter()
        .chain(&slr.rows)
        .map(|r| r.proportion.max(r.band_hi))
        .fold(2.0 * gamlss.level, f64::max)
        * 100.0
        * 1.1;
    let ax = Axes {
        x: (x0, x1),
        y: (0.0, ymax),
    };
    let mut out = String::new();
    ax.frame(&mut out, title, "age (years)", "% below LLN");
    for r in rows {
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{BAND_COLOUR}" fill-opacity="0.6"/>"#,
            ax.px(r.age_lo),
            ax.py(100.0 * r.band_hi),
            ax.px(r.age_hi) - ax.px(r.age_lo),
            ax.py(100.0 * r.band_lo) - ax.py(100.0 * r.band_hi)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="black" stroke-dasharray="4 3"/>"#,
        ax.px(x0),
        ax.px(x1),
        ax.py(100.0 * gamlss.level),
        ax.py(100.0 * gamlss.level)
    );
    for r in rows {
        circle(&mut out, ax.px(0.5 * (r.age_lo + r.age_hi)) - 4.0, ax.py(100.0 * r.proportion));
    }
    for r in &slr.rows {
        triangle(&mut out, ax.px(0.5 * (r.age_lo + r.age_hi)) + 4.0, ax.py(100.0 * r.proportion));
    }
    legend(&mut out, false);
    out.push_str("</svg>\n");
    out
}

/// Normal QQ plot of one age group with its ELL band.
pub fn qq_svg(title: &str, g: &QqFigureGroup, lln_marker: f64) -> String {
    let lim = g
        .theoretical
        .iter()
        .chain(&g.gamlss_z)
        .chain(&g.slr_z)
        .chain(&g.ell_lo)
        .chain(&g.ell_hi)
        .map(|v| v.abs())
        .fold(1.0, f64::max)
        .min(6.0);
    let ax = Axes {
        x: (-lim, lim),
        y: (-lim, lim),
    };
    let clamp = |v: f64| v.clamp(-lim, lim);
    let mut out = String::new();
    ax.frame(&mut out, title, "theoretical z", "observed z");
    let mut poly = String::new();
    for (t, lo) in g.theoretical.iter().zip(&g.ell_lo) {
        let _ = write!(poly, "{:.1},{:.1} ", ax.px(*t), ax.py(clamp(*lo)));
    }
    for (t, hi) in g.theoretical.iter().zip(&g.ell_hi).rev() {
        let _ = write!(poly, "{:.1},{:.1} ", ax.px(*t), ax.py(clamp(*hi)));
    }
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="{BAND_COLOUR}" fill-opacity="0.6"/>"#,
        poly.trim_end()
    );
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        ax.px(-lim),
        ax.py(-lim),
        ax.px(lim),
        ax.py(lim)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{:.1}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="black" stroke-dasharray="4 3"/>"#,
        ax.px(lln_marker),
        ax.px(lln_marker),
        ax.py(-lim),
        ax.py(lim)
    );
    for (t, z) in g.theoretical.iter().zip(&g.gamlss_z) {
        circle(&mut out, ax.px(*t), ax.py(clamp(*z)));
    }
    for (t, z) in g.theoretical.iter().zip(&g.slr_z) {
        triangle(&mut out, ax.px(*t), ax.py(clamp(*z)));
    }
    legend(&mut out, true);
    out.push_str("</svg>\n");
    out
}
