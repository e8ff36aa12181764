//! DET curves as a standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Context, Result};

/// `(r_fa, p_miss)` samples per event type, in file order.
pub type Curves = BTreeMap<String, Vec<(f64, f64)>>;

pub fn parse_det_csv(text: &str) -> Result<Curves> {
    let mut curves = Curves::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim().starts_with("type,threshold,p_miss,r_fa") => {}
        _ => bail!("DET CSV must start with a type,threshold,p_miss,r_fa,t_fa header"),
    }
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            bail!("line {}: expected at least 4 fields", idx + 1);
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .trim()
                .parse()
                .with_context(|| format!("line {}: bad number {:?}", idx + 1, fields[i]))
        };
        num(1)?;
        let (p_miss, r_fa) = (num(2)?, num(3)?);
        curves
            .entry(fields[0].trim().to_string())
            .or_default()
            .push((r_fa, p_miss));
    }
    Ok(curves)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Miss probability against false alarms per minute, one polyline per type.
pub fn det_svg(curves: &Curves) -> String {
    let x_max = curves
        .values()
        .flatten()
        .map(|&(r, _)| r)
        .fold(0.0f64, f64::max)
        .max(1.0);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |r: f64| MARGIN + r / x_max * plot_w;
    let sy = |p: f64| HEIGHT - MARGIN - p * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (x, y) = (sx(f * x_max), sy(f));
        writeln!(
            s,
            r##"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
            HEIGHT - MARGIN
        )
        .unwrap();
        writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            WIDTH - MARGIN
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{:.2}</text>"#,
            HEIGHT - MARGIN + 16.0,
            f * x_max
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{f:.1}</text>"#,
            MARGIN - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">false alarms per minute</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">miss probability</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();

    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(r, p)| format!("{:.2},{:.2}", sx(r), sy(p))).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let lx = WIDTH - MARGIN - 110.0;
        writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
