//! Log-log SVG plots of a metric against iteration, one median line per
//! method with a shaded interquartile band.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use iacv::quartiles;

/// Per method: `(t, median, q1, q3)` sorted by `t`.
pub type Series = BTreeMap<String, Vec<(f64, f64, f64, f64)>>;

/// Reads `summary.csv` directly, or aggregates `metrics.csv` across trials.
pub fn load_series(path: &Path, metric: &str) -> anyhow::Result<Series> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut series = Series::new();
    if let (Some(cm), Some(ct), Some(cmet), Some(cmed), Some(c1), Some(c3)) =
        (col("method"), col("t"), col("metric"), col("median"), col("q1"), col("q3"))
    {
        for rec in r.records() {
            let rec = rec?;
            if &rec[cmet] != metric {
                continue;
            }
            let f = |c: usize| rec[c].parse::<f64>().unwrap_or(f64::NAN);
            series.entry(rec[cm].to_string()).or_default().push((f(ct), f(cmed), f(c1), f(c3)));
        }
    } else if let (Some(cm), Some(ct), Some(cv)) = (col("method"), col("t"), col(metric)) {
        let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            if &rec[cm] == "error" {
                continue;
            }
            let t: u64 = rec[ct].parse().with_context(|| format!("bad t {:?}", &rec[ct]))?;
            groups.entry((rec[cm].to_string(), t)).or_default().push(rec[cv].parse().unwrap_or(f64::NAN));
        }
        for ((m, t), v) in groups {
            if let Some(q) = quartiles(&v) {
                series.entry(m).or_default().push((t as f64, q.median, q.q1, q.q3));
            }
        }
    } else {
        bail!("{} has neither summary columns nor a {metric:?} column", path.display());
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(series)
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn over(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && *v > 0.0) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            return None;
        }
        let (lo, hi) = (lo.floor(), hi.ceil());
        Some(Self { lo, hi: if hi > lo { hi } else { lo + 1.0 } })
    }

    fn frac(&self, v: f64) -> f64 {
        (v.log10() - self.lo) / (self.hi - self.lo)
    }
}

/// Renders the series as an SVG document. Nonpositive values are skipped.
pub fn render_svg(series: &Series, metric: &str) -> anyhow::Result<String> {
    let xa = Axis::over(series.values().flatten().map(|p| p.0)).context("no positive iterations to plot")?;
    let ya =
        Axis::over(series.values().flatten().flat_map(|p| [p.1, p.2, p.3])).context("no positive values to plot")?;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |t: f64| LEFT + xa.frac(t) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v)) * ph;
    let ok = |v: f64| v.is_finite() && v > 0.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for d in (xa.lo as i32)..=(xa.hi as i32) {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, TOP + ph + 18.0);
    }
    for d in (ya.lo as i32)..=(ya.hi as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ =
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration t</text>"#, LEFT + pw / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{metric}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (k, (method, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let band: Vec<_> = pts.iter().filter(|p| ok(p.0) && ok(p.2) && ok(p.3)).collect();
        if band.len() > 1 {
            let mut poly: Vec<String> = band.iter().map(|p| format!("{:.1},{:.1}", px(p.0), py(p.3))).collect();
            poly.extend(band.iter().rev().map(|p| format!("{:.1},{:.1}", px(p.0), py(p.2))));
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                poly.join(" ")
            );
        }
        let line: Vec<String> =
            pts.iter().filter(|p| ok(p.0) && ok(p.1)).map(|p| format!("{:.1},{:.1}", px(p.0), py(p.1))).collect();
        if !line.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = TOP + 16.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{method}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn plot_file(input: &Path, out: &Path, metric: &str) -> anyhow::Result<()> {
    let series = load_series(input, metric)?;
    if series.is_empty() {
        bail!("no rows for metric {metric:?} in {}", input.display());
    }
    std::fs::write(out, render_svg(&series, metric)?).with_context(|| format!("writing {}", out.display()))
}
