//! Minimal SVG line charts of fragility curves: logarithmic IM axis,
//! probability axis on [0, 1], optional shaded band.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555",
];

/// One polyline; `None` values break the line.
pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [Option<f64>],
}

/// Shaded region between two curves.
pub struct Band<'a> {
    pub lower: &'a [Option<f64>],
    pub upper: &'a [Option<f64>],
}

pub fn fragility_chart(
    title: &str,
    x_label: &str,
    grid: &[f64],
    series: &[Series],
    band: Option<Band>,
) -> String {
    let (x0, x1) = (grid[0].ln(), grid[grid.len() - 1].ln());
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x.ln() - x0) / span * pw;
    let py = |p: f64| TOP + (1.0 - p.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    // axes, ticks, labels
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let p = k as f64 / 5.0;
        let y = py(p);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{p:.1}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for t in decade_ticks(grid[0], grid[grid.len() - 1]) {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">probability of exceedance</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    if let Some(b) = band {
        for run in defined_runs(grid, |i| b.lower[i].zip(b.upper[i])) {
            let mut pts: Vec<String> = run
                .iter()
                .map(|&(x, (_, u))| format!("{:.2},{:.2}", px(x), py(u)))
                .collect();
            pts.extend(
                run.iter()
                    .rev()
                    .map(|&(x, (l, _))| format!("{:.2},{:.2}", px(x), py(l))),
            );
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##,
                pts.join(" ")
            );
        }
    }
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for run in defined_runs(grid, |i| ser.values[i]) {
            let pts: Vec<String> = run
                .iter()
                .map(|&(x, p)| format!("{:.2},{:.2}", px(x), py(p)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Maximal runs of consecutive grid points where `f` is defined.
fn defined_runs<T: Copy>(grid: &[f64], f: impl Fn(usize) -> Option<T>) -> Vec<Vec<(f64, T)>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for (i, &x) in grid.iter().enumerate() {
        match f(i) {
            Some(v) => cur.push((x, v)),
            None if !cur.is_empty() => runs.push(std::mem::take(&mut cur)),
            None => {}
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// 1, 2 and 5 times powers of ten inside `[lo, hi]`.
fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = lo.log10().floor() as i32;
    while 10f64.powi(e) <= hi {
        for m in [1.0, 2.0, 5.0] {
            let t = m * 10f64.powi(e);
            if t >= lo && t <= hi {
                out.push(t);
            }
        }
        e += 1;
    }
    out
}

fn tick_label(t: f64) -> String {
    let s = format!("{t:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breaks_lines_at_undefined_points() {
        let runs = defined_runs(&[1.0, 2.0, 3.0, 4.0], |i| {
            [Some(0.1), None, Some(0.3), Some(0.4)][i]
        });
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].len(), 2);
    }

    #[test]
    fn ticks_cover_range() {
        assert_eq!(decade_ticks(0.03, 0.6), vec![0.05, 0.1, 0.2, 0.5]);
        assert_eq!(tick_label(0.05), "0.05");
    }

    #[test]
    fn chart_is_well_formed() {
        let v = [Some(0.1), Some(0.5), Some(0.9)];
        let svg = fragility_chart(
            "a < b",
            "PGA (g)",
            &[0.1, 0.3, 0.9],
            &[Series {
                label: "mle",
                values: &v,
            }],
            None,
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
