use std::fmt::Write as _;

use super::backtest::{FoldReport, ModelKind};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn colour(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Kan => "#1f77b4",
        ModelKind::Gbt => "#2ca02c",
        ModelKind::Hybrid => "#d62728",
        ModelKind::Naive => "#7f7f7f",
        ModelKind::SeasonalNaive => "#9467bd",
        ModelKind::LinearArx => "#ff7f0e",
    }
}

/// Static line chart of the actual test week against each model's forecast.
pub fn render_fold_svg(fold: &FoldReport) -> String {
    let series: Vec<(&str, &str, &[f64])> =
        std::iter::once(("actual", "#000000", fold.actual.as_slice()))
            .chain(
                fold.forecasts
                    .iter()
                    .map(|(m, v)| (m.as_str(), colour(*m), v.as_slice())),
            )
            .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, _, v) in &series {
        for &y in v.iter() {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let n = fold.actual.len().max(2);
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">fold {} ({} to {})</text>"#,
        fold.fold, fold.test_start, fold.test_end
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="gray"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="gray"/>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{hi:.1}</text><text x="5" y="{}" font-family="sans-serif" font-size="10">{lo:.1}</text>"#,
        MARGIN + 4.0,
        HEIGHT - MARGIN
    );
    for (k, (name, col, v)) in series.iter().enumerate() {
        let pts: Vec<String> = v
            .iter()
            .enumerate()
            .map(|(i, &p)| format!("{:.2},{:.2}", x(i), y(p)))
            .collect();
        let width = if *name == "actual" { 2.0 } else { 1.2 };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{col}" stroke-width="{width}" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{col}">{name}</text>"#,
            WIDTH - MARGIN + 4.0 - 40.0
        );
    }
    s.push_str("</svg>\n");
    s
}
