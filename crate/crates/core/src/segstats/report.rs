use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::record::SegStatsRecord;
use crate::error::{Error, Result};
use crate::scene::{ClassInventory, BACKGROUND};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub class_id: u8,
    pub name: String,
    pub true_mean: f64,
    pub gen_mean: f64,
    /// Either bar exceeds the clip ceiling.
    pub clipped: bool,
}

/// Paired per-class bars, most frequent true class first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub rows: Vec<HistogramRow>,
    pub clip_ceiling: f64,
    /// Set when `top_k` asked for more classes than exist.
    pub truncated: bool,
}

/// Builds the histogram over foreground classes.
pub fn histogram_report(
    g: &SegStatsRecord,
    t: &SegStatsRecord,
    inventory: &ClassInventory,
    top_k: usize,
    clip_ceiling: f64,
) -> Result<HistogramReport> {
    if g.classes != t.classes {
        return Err(Error::ClassMismatch(format!("{:?} vs {:?}", g.classes, t.classes)));
    }
    let mut rows: Vec<HistogramRow> = t
        .classes
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != BACKGROUND)
        .map(|(i, &c)| HistogramRow {
            class_id: c,
            name: inventory.name(c).to_string(),
            true_mean: t.mean[i],
            gen_mean: g.mean[i],
            clipped: t.mean[i] > clip_ceiling || g.mean[i] > clip_ceiling,
        })
        .collect();
    rows.sort_by(|a, b| b.true_mean.total_cmp(&a.true_mean).then(a.class_id.cmp(&b.class_id)));
    let truncated = top_k > rows.len();
    if truncated {
        log::warn!("top_k {top_k} exceeds {} classes; showing all", rows.len());
    }
    rows.truncate(top_k);
    Ok(HistogramReport { rows, clip_ceiling, truncated })
}

impl HistogramReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,true_mean,gen_mean,clipped\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6},{}", r.name, r.true_mean, r.gen_mean, r.clipped);
        }
        s
    }

    /// Standalone paired-bar chart. Bars above the ceiling are cut and
    /// labelled with their value.
    pub fn to_svg(&self, title: &str) -> String {
        let (bar, gap, left, top, plot_h) = (14.0, 16.0, 56.0, 40.0, 220.0);
        let width = left + self.rows.len() as f64 * (2.0 * bar + gap) + 20.0;
        let height = top + plot_h + 90.0;
        let ceiling = self.clip_ceiling.max(1e-9);
        let ymax = self
            .rows
            .iter()
            .map(|r| r.true_mean.max(r.gen_mean))
            .fold(0.0, f64::max)
            .min(ceiling)
            .max(1.0);
        let y = |v: f64| top + plot_h - plot_h * v.min(ymax) / ymax;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{}</text>"#, escape(title));
        for i in 0..=4 {
            let v = ymax * i as f64 / 4.0;
            let yy = y(v);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" x2="{:.1}" y1="{yy:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"##,
                width - 20.0,
                left - 4.0,
                yy + 3.0
            );
        }
        for (i, r) in self.rows.iter().enumerate() {
            let x0 = left + gap / 2.0 + i as f64 * (2.0 * bar + gap);
            for (k, (v, color)) in [(r.true_mean, "#4c72b0"), (r.gen_mean, "#dd8452")].into_iter().enumerate() {
                let x = x0 + k as f64 * bar;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{:.1}" width="{bar}" height="{:.1}" fill="{color}"/>"#,
                    y(v),
                    top + plot_h - y(v)
                );
                if v > ymax {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="8">{v:.0}</text>"#,
                        x + bar / 2.0,
                        top - 4.0
                    );
                }
            }
            let _ = writeln!(
                s,
                r#"<text transform="translate({:.1},{:.1}) rotate(45)">{}</text>"#,
                x0 + bar,
                top + plot_h + 12.0,
                escape(&r.name)
            );
        }
        let ly = height - 14.0;
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{:.1}" width="10" height="10" fill="#4c72b0"/><text x="{:.1}" y="{ly:.1}">training distribution</text>"##,
            ly - 9.0,
            left + 14.0
        );
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="#dd8452"/><text x="{:.1}" y="{ly:.1}">generated</text>"##,
            left + 140.0,
            ly - 9.0,
            left + 154.0
        );
        s.push_str("</svg>\n");
        s
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
