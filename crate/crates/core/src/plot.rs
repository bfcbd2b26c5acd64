//! Hand-written SVG output: dendrogram with an optional indicator strip,
//! and per-cluster pattern plots of leader compositions.
//!
//! Coordinates are printed with two decimals and elements are emitted in a
//! fixed order, so identical inputs give byte-identical files.

use std::fmt::Write;

use crate::diag::{decile_ranks, IndicatorTable};
use crate::hclust::Dendrogram;
use crate::model::{CategorySchema, Partition, VariableSchema};

const LEAF_SPACING: f64 = 28.0;
const MARGIN: f64 = 40.0;
const TREE_HEIGHT: f64 = 320.0;
const LABEL_SPACE: f64 = 90.0;
const STRIP_ROW: f64 = 14.0;
const STRIP_LABEL: f64 = 90.0;

/// Light-to-dark sequential palette for deciles 1..=10.
const DECILE_COLORS: [&str; 10] = [
    "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c", "#08306b", "#041a3d",
];
const MISSING_COLOR: &str = "#d9d9d9";

const SERIES_COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Dendrogram SVG. Leaves are laid out depth first, left subtree first.
/// With `indicators`, one decile-shaded row per indicator is drawn under
/// the leaf labels. With `cut_k`, a dashed line marks where the tree is
/// cut into `cut_k` clusters.
pub fn dendrogram_svg(dendrogram: &Dendrogram, indicators: Option<&IndicatorTable>, cut_k: Option<usize>) -> String {
    let n = dendrogram.num_leaves();
    let order = dendrogram.leaf_order();
    let names: Vec<String> = indicators
        .map(|t| t.indicators().map(String::from).collect())
        .unwrap_or_default();
    let left = MARGIN + if names.is_empty() { 0.0 } else { STRIP_LABEL };
    let width = left + n as f64 * LEAF_SPACING + MARGIN;
    let baseline = MARGIN + TREE_HEIGHT;
    let strip_top = baseline + LABEL_SPACE;
    let height = strip_top + names.len() as f64 * STRIP_ROW + MARGIN;

    let max_h = dendrogram
        .merges()
        .iter()
        .map(|m| m.height)
        .fold(0.0_f64, f64::max);
    let scale = if max_h > 0.0 { TREE_HEIGHT / max_h } else { 0.0 };
    let y_of = |node: usize| baseline - dendrogram.height(node) * scale;

    let mut x = vec![0.0; 2 * n - 1];
    for (pos, &leaf) in order.iter().enumerate() {
        x[leaf] = left + (pos as f64 + 0.5) * LEAF_SPACING;
    }
    for (i, m) in dendrogram.merges().iter().enumerate() {
        x[n + i] = 0.5 * (x[m.left] + x[m.right]);
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g class="tree" fill="none" stroke="black" stroke-width="1.2" data-heights="{}">"#,
        if dendrogram.normalize_by_p() { "criterion_increase_over_p" } else { "criterion_increase" }
    );
    for (i, m) in dendrogram.merges().iter().enumerate() {
        let node = n + i;
        let _ = writeln!(
            svg,
            r#"<path class="junction" data-node="{node}" d="M{:.2},{:.2} V{:.2} H{:.2} V{:.2}"/>"#,
            x[m.left],
            y_of(m.left),
            y_of(node),
            x[m.right],
            y_of(m.right)
        );
    }
    let _ = writeln!(svg, "</g>");

    if let Some(k) = cut_k.filter(|&k| k >= 2 && k <= n) {
        // between the last kept merge and the first undone one
        let merges = dendrogram.merges();
        let upper = merges[n - k].height;
        let lower = if n - k > 0 { merges[n - k - 1].height } else { 0.0 };
        let y = baseline - 0.5 * (upper + lower) * scale;
        let _ = writeln!(
            svg,
            r#"<line class="cut" data-k="{k}" x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="red" stroke-dasharray="4,3"/>"#,
            width - MARGIN
        );
    }

    let _ = writeln!(svg, r#"<g class="leaves" font-family="sans-serif" font-size="11">"#);
    for &leaf in &order {
        let (lx, ly) = (x[leaf], baseline + 8.0);
        let _ = writeln!(
            svg,
            r#"<text class="leaf-label" x="{lx:.2}" y="{ly:.2}" transform="rotate(90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(&dendrogram.leaves()[leaf])
        );
    }
    let _ = writeln!(svg, "</g>");

    if let Some(table) = indicators {
        let ordered_ids: Vec<&str> = order.iter().map(|&l| dendrogram.leaves()[l].as_str()).collect();
        let _ = writeln!(svg, r#"<g class="indicator-strip" font-family="sans-serif" font-size="10">"#);
        for (row, name) in names.iter().enumerate() {
            let top = strip_top + row as f64 * STRIP_ROW;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                top + STRIP_ROW - 3.0,
                escape(name)
            );
            for (pos, decile) in decile_ranks(table, name, &ordered_ids).into_iter().enumerate() {
                let fill = decile.map_or(MISSING_COLOR, |d| DECILE_COLORS[d as usize - 1]);
                let decile = decile.map_or_else(|| "NA".to_string(), |d| d.to_string());
                let _ = writeln!(
                    svg,
                    r#"<rect class="decile" data-indicator="{}" data-unit="{}" data-decile="{decile}" x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="white"/>"#,
                    escape(name),
                    escape(ordered_ids[pos]),
                    left + pos as f64 * LEAF_SPACING,
                    LEAF_SPACING,
                    STRIP_ROW
                );
            }
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

const PANEL_WIDTH: f64 = 260.0;
const PANEL_HEIGHT: f64 = 200.0;
const PANEL_GAP: f64 = 30.0;
const LEGEND_HEIGHT: f64 = 20.0;

/// One panel per cluster; in each, one broken line per variable across the
/// fixed category order. The lines only aid comparison of patterns; the
/// category axis is nominal.
pub fn pattern_svg(partition: &Partition, categories: &CategorySchema, variables: &VariableSchema) -> String {
    let k = partition.len();
    let m = categories.len();
    let y_max = partition
        .clusters()
        .iter()
        .flat_map(|c| c.leader().components())
        .flat_map(|comp| comp.values().iter().copied())
        .fold(0.0_f64, f64::max);
    // round the axis up to the next tenth
    let y_max = ((y_max * 10.0).ceil() / 10.0).clamp(0.1, 1.0);
    let legend_rows = variables.len().div_ceil(4) as f64;
    let width = MARGIN + k as f64 * (PANEL_WIDTH + PANEL_GAP) - PANEL_GAP + MARGIN;
    let height = MARGIN + PANEL_HEIGHT + 40.0 + legend_rows * LEGEND_HEIGHT + MARGIN;
    let step = PANEL_WIDTH / m as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (c, cluster) in partition.clusters().iter().enumerate() {
        let x0 = MARGIN + c as f64 * (PANEL_WIDTH + PANEL_GAP);
        let y0 = MARGIN;
        let y_of = |v: f64| y0 + PANEL_HEIGHT * (1.0 - v / y_max);
        let _ = writeln!(svg, r#"<g class="panel" data-cluster="{}">"#, c + 1);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">Cluster {} ({} units)</text>"#,
            x0 + PANEL_WIDTH / 2.0,
            y0 - 12.0,
            c + 1,
            cluster.len()
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL_WIDTH:.2}" height="{PANEL_HEIGHT:.2}" fill="none" stroke="gray"/>"#
        );
        for tick in 0..=((y_max * 10.0).round() as usize) {
            let v = tick as f64 / 10.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
                x0 - 4.0,
                y_of(v) + 3.0
            );
        }
        for (l, label) in categories.labels().iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x0 + (l as f64 + 0.5) * step,
                y0 + PANEL_HEIGHT + 14.0,
                escape(label)
            );
        }
        for (j, (name, comp)) in variables
            .names()
            .iter()
            .zip(cluster.leader().components())
            .enumerate()
        {
            let points: Vec<String> = comp
                .values()
                .iter()
                .enumerate()
                .map(|(l, &v)| format!("{:.2},{:.2}", x0 + (l as f64 + 0.5) * step, y_of(v)))
                .collect();
            let values: Vec<String> = comp.values().iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="pattern" data-variable="{}" data-values="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                escape(name),
                values.join(" "),
                points.join(" "),
                SERIES_COLORS[j % SERIES_COLORS.len()]
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let legend_top = MARGIN + PANEL_HEIGHT + 36.0;
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (j, name) in variables.names().iter().enumerate() {
        let (row, col) = (j / 4, j % 4);
        let lx = MARGIN + col as f64 * 90.0;
        let ly = legend_top + row as f64 * LEGEND_HEIGHT;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 18.0,
            SERIES_COLORS[j % SERIES_COLORS.len()],
            lx + 22.0,
            ly + 3.0,
            escape(name)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hclust::agglomerate;
    use crate::model::{Composition, Dataset, SymbolicUnit};

    fn dataset() -> Dataset {
        let comp = |v: [f64; 3]| Composition::new(v.to_vec(), 1e-9).unwrap();
        let units = vec![
            SymbolicUnit::new("A&B", vec![comp([0.6, 0.2, 0.2])], vec![1.0]).unwrap(),
            SymbolicUnit::new("C", vec![comp([0.1, 0.1, 0.8])], vec![2.0]).unwrap(),
            SymbolicUnit::new("D", vec![comp([0.2, 0.1, 0.7])], vec![2.0]).unwrap(),
        ];
        Dataset::new(
            CategorySchema::new(["x", "y", "z"]).unwrap(),
            VariableSchema::new(["v"]).unwrap(),
            units,
        )
        .unwrap()
    }

    #[test]
    fn dendrogram_structure() {
        let ds = dataset();
        let d = agglomerate(&ds, false).unwrap();
        let svg = dendrogram_svg(&d, None, Some(2));
        assert_eq!(svg.matches("class=\"leaf-label\"").count(), 3);
        assert_eq!(svg.matches("class=\"junction\"").count(), 2);
        assert!(svg.contains("A&amp;B"));
        assert_eq!(svg.matches("class=\"cut\"").count(), 1);
        assert_eq!(svg, dendrogram_svg(&d, None, Some(2)));
    }

    #[test]
    fn indicator_strip_rows() {
        let ds = dataset();
        let d = agglomerate(&ds, false).unwrap();
        let mut t = IndicatorTable::new();
        t.insert("C", "GDP", 1.0).unwrap();
        t.insert("D", "GDP", 2.0).unwrap();
        t.insert("A&B", "MD1000", 3.0).unwrap();
        let svg = dendrogram_svg(&d, Some(&t), None);
        assert_eq!(svg.matches("class=\"decile\"").count(), 6);
        assert_eq!(svg.matches("data-decile=\"NA\"").count(), 3);
    }

    #[test]
    fn uniform_leader_is_flat() {
        let units = vec![SymbolicUnit::new("U", vec![Composition::uniform(7)], vec![1.0]).unwrap()];
        let ds = Dataset::new(CategorySchema::mortality(), VariableSchema::new(["v"]).unwrap(), units).unwrap();
        let p = Partition::from_labels(&ds, &[0]).unwrap();
        let svg = pattern_svg(&p, ds.categories(), ds.variables());
        let points = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let ys: Vec<&str> = points.split(' ').map(|pt| pt.split(',').nth(1).unwrap()).collect();
        assert_eq!(ys.len(), 7);
        assert!(ys.iter().all(|y| *y == ys[0]));
    }
}
