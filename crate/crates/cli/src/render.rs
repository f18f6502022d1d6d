//! Side-by-side SVG overlay: left image at the origin, right image to its
//! right, one line per correspondence colored by its predicted label.

use std::collections::BTreeMap;
use std::fmt::Write;

use mcmatch::{CorrespondenceSet, Label, MatchResult, Real};

const GAP: f64 = 20.0;
const LEGEND_ROW: f64 = 18.0;
const OUTLIER: &str = "#000000";
const UNCLUSTERED: &str = "#9e9e9e";

/// Cluster colors; ids past the end wrap around.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#42d4f4",
];

pub fn color(label: Label) -> &'static str {
    match label {
        Label::Outlier => OUTLIER,
        Label::Inlier => UNCLUSTERED,
        Label::Cluster(c) => PALETTE[c as usize % PALETTE.len()],
    }
}

/// Errors when `result` does not label exactly the correspondences of `set`.
pub fn render_svg<T: Real>(set: &CorrespondenceSet<T>, result: &MatchResult<T>) -> Result<String, String> {
    if result.assignments.len() != set.len() {
        return Err(format!(
            "result labels {} correspondences, input has {}",
            result.assignments.len(),
            set.len()
        ));
    }
    let mut labels = vec![None; set.len()];
    for a in &result.assignments {
        let pos = set
            .position_of(a.index)
            .ok_or_else(|| format!("result index {} is not in the input", a.index))?;
        if labels[pos].replace(a.label).is_some() {
            return Err(format!("result labels index {} twice", a.index));
        }
    }
    let labels: Vec<Label> = labels.into_iter().map(|l| l.expect("every position labeled")).collect();

    let (wl, hl) = (set.left_size().width as f64, set.left_size().height as f64);
    let (wr, hr) = (set.right_size().width as f64, set.right_size().height as f64);
    let dx = wl + GAP;

    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    // outliers first, then unclustered, then clusters by id
    let legend: Vec<(Label, usize)> = counts.into_iter().collect();

    let width = dx + wr;
    let top = hl.max(hr);
    let height = top + GAP + LEGEND_ROW * legend.len() as f64;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = fmt(width),
        h = fmt(height)
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        fmt(width),
        fmt(height)
    )
    .unwrap();
    for (x, w, h) in [(0.0, wl, hl), (dx, wr, hr)] {
        writeln!(
            s,
            r##"<rect x="{}" y="0" width="{}" height="{}" fill="#f4f4f4" stroke="#555555"/>"##,
            fmt(x),
            fmt(w),
            fmt(h)
        )
        .unwrap();
    }

    for (group, _) in &legend {
        writeln!(s, r#"<g stroke="{}" stroke-width="1" fill="none">"#, color(*group)).unwrap();
        for (c, &l) in set.items().iter().zip(&labels) {
            if l != *group {
                continue;
            }
            let [x1, y1] = c.left.position.map(|v| v.to_f64_lossy());
            let [x2, y2] = c.right.position.map(|v| v.to_f64_lossy());
            writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                fmt(x1),
                fmt(y1),
                fmt(x2 + dx),
                fmt(y2)
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }

    for (row, (label, n)) in legend.iter().enumerate() {
        let y = top + GAP * 0.5 + LEGEND_ROW * row as f64;
        let name = match label {
            Label::Outlier => "outlier".to_string(),
            Label::Inlier => "inlier".to_string(),
            Label::Cluster(c) => format!("cluster {c}"),
        };
        writeln!(
            s,
            r#"<rect x="4" y="{}" width="12" height="12" fill="{}"/>"#,
            fmt(y),
            color(*label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="22" y="{}" font-family="sans-serif" font-size="12">{name}: {n}</text>"#,
            fmt(y + 10.0)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt(v: f64) -> String {
    let r = format!("{v:.2}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" {
        "0".into()
    } else {
        r.into()
    }
}
