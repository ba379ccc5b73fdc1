//! Minimal line plots rendered from the CSV artifacts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Leading `cols` numeric columns of every data row.
fn columns(csv: &str, cols: usize) -> Option<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let row: Option<Vec<f64>> = line
            .split(',')
            .take(cols)
            .map(|c| c.trim().parse().ok())
            .collect();
        let row = row?;
        if row.len() < cols {
            return None;
        }
        out.push(row);
    }
    (!out.is_empty()).then_some(out)
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn plot(title: &str, xlabel: &str, series: &[Series]) -> Option<String> {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    };
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return None;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{xlabel}</text>"#,
        W / 2.0,
        H - 10.0
    );
    for (v, x, y, anchor) in [
        (x0, sx(x0), H - PAD + 14.0, "start"),
        (x1, sx(x1), H - PAD + 14.0, "end"),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#
        );
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v:.3}</text>"#,
            PAD - 4.0
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            path.join(" ")
        );
        if series.len() <= COLORS.len() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
                W - PAD + 4.0 - 40.0,
                PAD + 12.0 * (i as f64 + 1.0),
                ser.label
            );
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// One curve per snapshot of a `t,x,u` trajectory.
pub fn profiles(csv: &str) -> Option<String> {
    let rows = columns(csv, 3)?;
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        match series.last_mut() {
            Some(s) if s.label == format!("t={}", r[0]) => s.points.push((r[1], r[2])),
            _ => series.push(Series {
                label: format!("t={}", r[0]),
                points: vec![(r[1], r[2])],
            }),
        }
    }
    plot("u(t, x)", "x", &series)
}

pub fn fronts(csv: &str) -> Option<String> {
    let rows = columns(csv, 2)?;
    let points = rows.iter().map(|r| (r[0], r[1])).collect();
    plot(
        "front position",
        "t",
        &[Series {
            label: "front".into(),
            points,
        }],
    )
}

pub fn dispersion(csv: &str) -> Option<String> {
    let rows = columns(csv, 3)?;
    let points = rows.iter().map(|r| (r[0], r[2])).collect();
    plot(
        "c(mu) = lambda(mu) / mu",
        "mu",
        &[Series {
            label: "c".into(),
            points,
        }],
    )
}

pub fn single_profile(csv: &str, title: &str) -> Option<String> {
    let rows = columns(csv, 2)?;
    let points = rows.iter().map(|r| (r[0], r[1])).collect();
    plot(
        title,
        "x",
        &[Series {
            label: String::new(),
            points,
        }],
    )
}

pub fn diagnostics(csv: &str) -> Option<String> {
    let rows = columns(csv, 3)?;
    let d0 = rows[0][1];
    let proxy = rows
        .iter()
        .map(|r| (r[0], if d0 > 0.0 { r[1] / d0 } else { r[1] }))
        .collect();
    let factor = rows.iter().map(|r| (r[0], r[2])).collect();
    plot(
        "proxy diameter ratio vs factor",
        "t",
        &[
            Series {
                label: "observed".into(),
                points: proxy,
            },
            Series {
                label: "factor".into(),
                points: factor,
            },
        ],
    )
}
