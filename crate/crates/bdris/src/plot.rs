//! SVG plot of mean spectral efficiency against the element count.

use std::fmt::Write as _;

use crate::config::Framework;
use crate::error::{HarnessError, Result};
use crate::summary::{Summary, SummaryRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// One plotted series, identified by framework and transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<'a> {
    pub framework: Framework,
    pub pt_dbm: f64,
    pub points: Vec<&'a SummaryRow>,
}

impl Curve<'_> {
    pub fn label(&self) -> String {
        let name = match self.framework {
            Framework::BdRis => "BD-RIS",
            Framework::DRis => "D-RIS",
        };
        format!("{name}, {} dBm", self.pt_dbm)
    }
}

/// Curves in (framework, P_t) order, points in increasing `K`.
pub fn curves(summary: &Summary) -> Result<Vec<Curve<'_>>> {
    let mut out: Vec<Curve<'_>> = Vec::new();
    for row in &summary.rows {
        match out.iter_mut().find(|c| c.framework == row.framework && c.pt_dbm == row.pt_dbm) {
            Some(c) => {
                if c.points.iter().any(|p| p.k == row.k) {
                    return Err(HarnessError::Input(format!(
                        "several configurations share {} K={} pt={} dBm; plot one configuration at a time",
                        row.framework.name(),
                        row.k,
                        row.pt_dbm
                    )));
                }
                c.points.push(row);
            }
            None => out.push(Curve { framework: row.framework, pt_dbm: row.pt_dbm, points: vec![row] }),
        }
    }
    out.sort_by(|a, b| a.framework.cmp(&b.framework).then(a.pt_dbm.total_cmp(&b.pt_dbm)));
    for c in &mut out {
        c.points.sort_by_key(|p| p.k);
    }
    Ok(out)
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the summary as a standalone SVG document.
///
/// Needs at least two distinct `K` values. Output bytes depend only on the
/// summary.
pub fn render_svg(summary: &Summary) -> Result<String> {
    let curves = curves(summary)?;
    let mut ks: Vec<usize> = summary.rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < 2 {
        let only = ks.first().map_or("none".to_string(), |k| k.to_string());
        return Err(HarnessError::Input(format!(
            "cannot plot against K with a single K value (K = {only}); \
             `run` evaluates one configuration, use `sweep --param K=a:b:step` to vary K"
        )));
    }
    let (kmin, kmax) = (ks[0] as f64, ks[ks.len() - 1] as f64);
    let top = summary.rows.iter().map(|r| r.mean + r.ci95.unwrap_or(0.0)).fold(0.0f64, f64::max);
    let ystep = if top > 0.0 { nice_step(top) } else { 1.0 };
    let ymax = ((top / ystep).ceil() * ystep).max(ystep);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |k: f64| LEFT + (k - kmin) / (kmax - kmin) * pw;
    let y = |v: f64| TOP + (1.0 - v / ymax) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let _ = writeln!(s, r##"<g stroke="#dddddd" stroke-width="1">"##);
    let mut v = 0.0;
    while v <= ymax + 1e-9 * ymax {
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, LEFT, y(v), LEFT + pw, y(v));
        v += ystep;
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}"/>"#);
    for &k in &ks {
        let xk = x(k as f64);
        let _ = writeln!(s, r#"<line x1="{xk:.2}" y1="{:.2}" x2="{xk:.2}" y2="{:.2}"/>"#, TOP + ph, TOP + ph + 5.0);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g text-anchor="middle">"#);
    for &k in &ks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{k}</text>"#, x(k as f64), TOP + ph + 20.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">Number of elements K</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)">Spectral efficiency (b/s/Hz)</text>"#,
        TOP + ph / 2.0
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g text-anchor="end">"#);
    let mut v = 0.0;
    while v <= ymax + 1e-9 * ymax {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT - 6.0, y(v) + 4.0, tick_label(v, ystep));
        v += ystep;
    }
    let _ = writeln!(s, "</g>");

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = match c.framework {
            Framework::BdRis => "",
            Framework::DRis => r#" stroke-dasharray="6 4""#,
        };
        let _ = writeln!(s, r#"<g class="curve" stroke="{color}" fill="{color}">"#);
        let _ = writeln!(s, "<title>{}</title>", escape(&c.label()));
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", x(p.k as f64), y(p.mean))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke-width="2"{dash} points="{}"/>"#, pts.join(" "));
        for p in &c.points {
            let (px, py) = (x(p.k as f64), y(p.mean));
            if let Some(ci) = p.ci95 {
                let (lo, hi) = (y((p.mean - ci).max(0.0)), y(p.mean + ci));
                let _ = writeln!(
                    s,
                    r#"<path stroke-width="1" d="M{px:.2} {lo:.2}V{hi:.2}M{:.2} {lo:.2}H{:.2}M{:.2} {hi:.2}H{:.2}"/>"#,
                    px - 4.0,
                    px + 4.0,
                    px - 4.0,
                    px + 4.0
                );
            }
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }

    let lx = LEFT + pw + 15.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let dash = match c.framework {
            Framework::BdRis => "",
            Framework::DRis => r#" stroke-dasharray="6 4""#,
        };
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 28.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 34.0, ly + 4.0, escape(&c.label()));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
