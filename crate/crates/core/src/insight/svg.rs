use std::fmt::Write;

use super::{FeatureValue, Histogram};

/// Horizontal space for bars; the zero axis sits in its middle.
pub const BAR_AREA_WIDTH: f64 = 400.0;

const LABEL_WIDTH: f64 = 300.0;
const MARGIN: f64 = 20.0;
const ROW_HEIGHT: f64 = 22.0;
const BAR_HEIGHT: f64 = 16.0;
const TITLE_HEIGHT: f64 = 40.0;
const POSITIVE: &str = "#3b75af";
const NEGATIVE: &str = "#c4473a";
const AXIS: &str = "#444444";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Signed horizontal bars around a central zero axis, one row per value in
/// the given order. Bar width is `|value| · scale` with one scale for the
/// whole chart, and every bar carries its value in `data-value`.
pub fn bar_chart_svg(title: &str, rows: &[FeatureValue]) -> String {
    let half = BAR_AREA_WIDTH / 2.0;
    let max_abs = rows.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    let scale = if max_abs > 0.0 { half / max_abs } else { 0.0 };
    let width = LABEL_WIDTH + BAR_AREA_WIDTH + 2.0 * MARGIN + 60.0;
    let height = TITLE_HEIGHT + ROW_HEIGHT * rows.len() as f64 + MARGIN;
    let zero = MARGIN + LABEL_WIDTH + half;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-size="14" font-weight="bold">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<g data-scale="{scale}">"#);
    for (i, row) in rows.iter().enumerate() {
        let y = TITLE_HEIGHT + ROW_HEIGHT * i as f64;
        let w = row.value.abs() * scale;
        let (x, fill) = if row.value < 0.0 { (zero - w, NEGATIVE) } else { (zero, POSITIVE) };
        let label_y = y + BAR_HEIGHT - 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{label_y}" text-anchor="end">{}</text>"#,
            MARGIN + LABEL_WIDTH - 8.0,
            escape(&row.feature)
        );
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{x}" y="{y}" width="{w}" height="{BAR_HEIGHT}" fill="{fill}" data-feature="{}" data-value="{}"/>"#,
            escape(&row.feature),
            row.value
        );
        let (vx, anchor) = if row.value < 0.0 { (x - 4.0, "end") } else { (x + w + 4.0, "start") };
        let _ = writeln!(s, r#"<text x="{vx}" y="{label_y}" text-anchor="{anchor}" font-size="10">{:.3}</text>"#, row.value);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<line x1="{zero}" y1="{}" x2="{zero}" y2="{}" stroke="{AXIS}" stroke-width="1"/>"#,
        TITLE_HEIGHT - 4.0,
        height - MARGIN + 4.0
    );
    s.push_str("</svg>\n");
    s
}

/// Vertical bars, one per bin, heights proportional to counts.
pub fn histogram_svg(title: &str, hist: &Histogram) -> String {
    let plot_h = 200.0;
    let bins = hist.counts.len().max(1);
    let bin_w = BAR_AREA_WIDTH / bins as f64;
    let max = hist.counts.iter().copied().max().unwrap_or(0);
    let scale = if max > 0 { plot_h / max as f64 } else { 0.0 };
    let width = BAR_AREA_WIDTH + 2.0 * MARGIN;
    let height = TITLE_HEIGHT + plot_h + 2.0 * MARGIN;
    let base = TITLE_HEIGHT + plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-size="14" font-weight="bold">{}</text>"#, escape(title));
    for (i, &c) in hist.counts.iter().enumerate() {
        let h = c as f64 * scale;
        let _ = writeln!(
            s,
            r#"<rect class="bin" x="{}" y="{}" width="{}" height="{h}" fill="{POSITIVE}" data-low="{}" data-high="{}" data-count="{c}"/>"#,
            MARGIN + bin_w * i as f64,
            base - h,
            bin_w - 1.0,
            hist.edges[i],
            hist.edges[i + 1]
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="{AXIS}" stroke-width="1"/>"#,
        MARGIN + BAR_AREA_WIDTH
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">0</text>"#, base + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1</text>"#, MARGIN + BAR_AREA_WIDTH, base + 14.0);
    s.push_str("</svg>\n");
    s
}
