//! Static SVG plots rendered from report data alone.
//!
//! Each item is placed by the last `key=value` tag of its name (`r=2`,
//! `a=1.000e-2`, `l=3`, ...), one series per key, against `log10(ratio)`.
//! Items without a tag are placed by index. Horizontal lines mark the
//! median and the allowed spread above it.

use std::fmt::Write;

use roughwave::verify::{FitReport, THRESHOLDS};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Point {
    series: String,
    x: f64,
    y: f64,
}

fn tag(name: &str) -> Option<(String, f64)> {
    let last = name.rsplit(' ').next()?;
    let (k, v) = last.split_once('=')?;
    Some((k.to_string(), v.parse().ok()?))
}

fn points(r: &FitReport) -> (Vec<Point>, bool) {
    let tagged: Vec<_> = r.items.iter().map(|i| tag(&i.name)).collect();
    let all_tagged = tagged.iter().all(Option::is_some);
    let pts: Vec<Point> = r
        .items
        .iter()
        .zip(&tagged)
        .enumerate()
        .filter(|(_, (i, _))| i.ratio > 0.0 && i.ratio.is_finite())
        .map(|(k, (i, t))| match (all_tagged, t) {
            (true, Some((key, x))) => Point {
                series: key.clone(),
                x: *x,
                y: i.ratio.log10(),
            },
            _ => Point {
                series: "item".into(),
                x: k as f64,
                y: i.ratio.log10(),
            },
        })
        .collect();
    // spans of more than a decade read better on a log axis
    let log_x = all_tagged && pts.iter().all(|p| p.x > 0.0) && {
        let (lo, hi) = range(pts.iter().map(|p| p.x));
        hi / lo > 10.0
    };
    if log_x {
        let pts = pts.into_iter().map(|p| Point { x: p.x.log10(), ..p }).collect();
        return (pts, true);
    }
    (pts, false)
}

fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// The SVG document for one report.
pub fn render(r: &FitReport) -> String {
    let (pts, log_x) = points(r);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let title = match r.params.get("weight").and_then(|w| w.as_str()) {
        Some(w) => format!("{} (w = {w})", r.check),
        None => r.check.clone(),
    };
    let verdict = if r.pass { "pass" } else { "FAIL" };
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20">{} — {verdict}, max/median = {:.3}</text>"#,
        escape(&title),
        r.max / r.median
    );
    if pts.is_empty() {
        s += "</svg>\n";
        return s;
    }
    let (xlo, xhi) = range(pts.iter().map(|p| p.x));
    let (x0, x1) = padded(xlo, xhi);
    let med = r.median.log10();
    let bound = med + THRESHOLDS.spread.log10();
    let (ylo, yhi) = range(pts.iter().map(|p| p.y).chain([med, bound]));
    let (y0, y1) = padded(ylo, yhi);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (y, label, dash) in [(med, "median", "4 3"), (bound, "allowed max", "1 3")] {
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="{dash}"/><text x="{}" y="{:.2}" fill="#666" text-anchor="end">{label}</text>"##,
            W - MARGIN,
            py(y),
            py(y),
            W - MARGIN - 4.0,
            py(y) - 4.0
        );
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            MARGIN - 6.0,
            py(y) + 4.0,
            y
        );
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.3}</text>"#,
            px(x),
            H - MARGIN + 16.0,
            x
        );
    }
    let mut series: Vec<&str> = pts.iter().map(|p| p.series.as_str()).collect();
    series.dedup();
    series.sort();
    series.dedup();
    let xlabel = format!("{}{}", if log_x { "log10 " } else { "" }, series.join(", "));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(&xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">log10 ratio</text>"#,
        H / 2.0,
        H / 2.0
    );
    for p in &pts {
        let c = COLOURS[series.iter().position(|s| *s == p.series).unwrap_or(0) % COLOURS.len()];
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}" fill-opacity="0.7"/>"#,
            px(p.x),
            py(p.y)
        );
    }
    if let (Some(slope), Some(fit)) = (r.slope, fit_line(r)) {
        let (xa, xb) = fit;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000"/><text x="{}" y="38">fitted slope {slope:.3}</text>"##,
            px(xa.0),
            py(xa.1),
            px(xb.0),
            py(xb.1),
            MARGIN
        );
    }
    s += "</svg>\n";
    s
}

/// Least-squares line through the `l=` items of a decay report, in plot
/// coordinates.
fn fit_line(r: &FitReport) -> Option<((f64, f64), (f64, f64))> {
    if r.check != "mollification_decay" {
        return None;
    }
    let pts: Vec<(f64, f64)> = r
        .items
        .iter()
        .filter_map(|i| match tag(&i.name) {
            Some((k, x)) if k == "l" && x > 0.0 && i.ratio > 0.0 => Some((x, i.ratio.log10())),
            _ => None,
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let slope = roughwave::verify::fit_slope(&xs, &ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let (a, b) = range(xs.iter().copied());
    Some(((a, my + slope * (a - mx)), (b, my + slope * (b - mx))))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use roughwave::params;
    use roughwave::verify::FitItem;

    fn item(name: &str, ratio: f64) -> FitItem {
        FitItem {
            name: name.into(),
            ratio,
        }
    }

    #[test]
    fn tags_and_axes() {
        assert_eq!(tag("pair-3 r=1.5"), Some(("r".into(), 1.5)));
        assert_eq!(tag("spikes-0 a=1.000e-3"), Some(("a".into(), 1e-3)));
        assert_eq!(tag("H_m=2"), Some(("H_m".into(), 2.0)));
        assert_eq!(tag("rough-1"), None);
        let r = FitReport::new(
            "demo",
            params! {},
            vec![item("x a=1e-3", 1.0), item("y a=1e-1", 2.0), item("z a=1", 0.5)],
            None,
            true,
        );
        let (pts, log_x) = points(&r);
        assert!(log_x);
        assert_eq!(pts[0].x, -3.0);
    }

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let r = FitReport::new(
            "mollification_decay",
            params! {"weight" => "a<b"},
            vec![item("l=0", 1.0), item("l=1", 0.5), item("l=2", 0.2), item("H_m=1", 0.1)],
            Some(-1.2),
            true,
        );
        let a = render(&r);
        assert_eq!(a, render(&r));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<circle").count(), 4);
        assert!(a.contains("fitted slope -1.200"));
        assert!(a.contains("a&lt;b"));
        let empty = FitReport::new("x", params! {}, vec![], None, true);
        assert!(render(&empty).ends_with("</svg>\n"));
    }
}
