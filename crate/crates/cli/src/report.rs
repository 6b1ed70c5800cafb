use std::fmt::Write as _;
use std::path::Path;

use ganscope::export;
use ganscope::segstats::{fsd_parts, SensitivityReport};
use serde::{Deserialize, Serialize};

use crate::pipeline::{read_file, read_json, to_json, write_file, FsdRecord, InversionSummary, Run};
use crate::{CliError, CliResult};

/// Panels per row in the reconstruction grid.
const GRID_COLUMNS: usize = 4;
const GRID_GAP: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsdRow {
    pub comparison: String,
    pub fsd: f64,
    pub mean_term: f64,
    pub covariance_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub fsd_table: Vec<FsdRow>,
    pub withheld: Option<String>,
    pub inversion: InversionSummary,
}

fn fsd_table(run: &Run) -> CliResult<Vec<FsdRow>> {
    let f: FsdRecord = read_json(&run.path("stats/fsd.json"))?;
    let s: SensitivityReport = read_json(&run.path("stats/sensitivity.json"))?;
    let floor = fsd_parts(&s.split_a, &s.split_b)?;
    let label = match run.cfg.withheld {
        Some(c) => format!("generator ({} withheld) vs. truth", run.inventory.name(c)),
        None => "generator vs. truth".to_string(),
    };
    Ok(vec![
        FsdRow { comparison: label, fsd: f.fsd, mean_term: f.parts.mean_term, covariance_term: f.fsd - f.parts.mean_term },
        FsdRow {
            comparison: format!("truth vs. truth, {} per split (noise floor)", s.n_per_split),
            fsd: floor.value(),
            mean_term: floor.mean_term,
            covariance_term: floor.value() - floor.mean_term,
        },
    ])
}

fn fsd_markdown(rows: &[FsdRow]) -> String {
    let mut s = String::from("| Comparison | FSD | Mean term | Covariance term |\n|---|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(s, "| {} | {:.2} | {:.2} | {:.2} |", r.comparison, r.fsd, r.mean_term, r.covariance_term);
    }
    s
}

/// Tiles the per-image panels row by row.
fn grid_png(dir: &Path, items: &[String]) -> CliResult<Vec<u8>> {
    let mut panels = Vec::with_capacity(items.len());
    for it in items {
        let path = dir.join(it).join("panel.png");
        panels.push(export::rgb_from_png(&read_file(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?);
    }
    let (pw, ph) = match panels.first() {
        Some(&(w, h, _)) => (w, h),
        None => return Err(CliError::Data(format!("{}: no reconstructions to show", dir.display()))),
    };
    if panels.iter().any(|&(w, h, _)| (w, h) != (pw, ph)) {
        return Err(CliError::Data(format!("{}: panels differ in size", dir.display())));
    }
    let cols = GRID_COLUMNS.min(panels.len());
    let rows = panels.len().div_ceil(cols);
    let (w, h) = (cols * pw + (cols + 1) * GRID_GAP, rows * ph + (rows + 1) * GRID_GAP);
    let mut px = vec![255u8; 3 * w * h];
    for (k, (_, _, src)) in panels.iter().enumerate() {
        let (ox, oy) = (GRID_GAP + (k % cols) * (pw + GRID_GAP), GRID_GAP + (k / cols) * (ph + GRID_GAP));
        for y in 0..ph {
            let d = 3 * ((oy + y) * w + ox);
            px[d..d + 3 * pw].copy_from_slice(&src[3 * y * pw..3 * (y + 1) * pw]);
        }
    }
    Ok(export::rgb_png(w, h, &px)?)
}

fn html(run: &Run, rows: &[FsdRow], inv: &InversionSummary) -> String {
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.1}%", 100.0 * v));
    let mut s = String::new();
    s.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>ganscope report</title>\n");
    s.push_str("<style>body{font-family:sans-serif;max-width:60em;margin:2em auto;padding:0 1em}table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:.3em .6em}td.n{text-align:right}img{image-rendering:pixelated;max-width:100%}</style>\n");
    s.push_str("</head>\n<body>\n<h1>Mode-drop report</h1>\n");
    let _ = writeln!(
        s,
        "<p>Master seed {}. Withheld class: {}.</p>",
        run.cfg.seed,
        run.cfg.withheld.map_or("none".to_string(), |c| esc(run.inventory.name(c)))
    );
    s.push_str("<h2>Segmentation statistics</h2>\n<img src=\"histogram.svg\" alt=\"per-class mean pixel counts\">\n");
    s.push_str("<p><a href=\"histogram.csv\">histogram.csv</a></p>\n<h2>Fréchet segmentation distance</h2>\n<table>\n");
    s.push_str("<tr><th>Comparison</th><th>FSD</th><th>Mean term</th><th>Covariance term</th></tr>\n");
    for r in rows {
        let _ = writeln!(
            s,
            "<tr><td>{}</td><td class=\"n\">{:.2}</td><td class=\"n\">{:.2}</td><td class=\"n\">{:.2}</td></tr>",
            esc(&r.comparison),
            r.fsd,
            r.mean_term,
            r.covariance_term
        );
    }
    s.push_str("</table>\n<h2>Layer inversion of real images</h2>\n");
    let _ = writeln!(
        s,
        "<p>Method {} on {} images. Each panel: photo (top left), reconstruction (top right), their segmentations below. \
         Withheld-class pixels recovered: {}. Other classes recovered: {}. Pixel correlation {:.4}.</p>",
        inv.method,
        inv.items.len(),
        pct(inv.withheld_recall),
        pct(inv.retained_recall),
        inv.pixel_correlation
    );
    s.push_str("<img src=\"reconstructions.png\" alt=\"reconstruction panels\">\n</body>\n</html>\n");
    s
}

/// Builds `report/` from the artifacts of a finished run. Output depends
/// only on those artifacts, so regenerating it is byte-identical.
pub fn write_report(run: &Run) -> CliResult<ReportSummary> {
    let out = run.path("report");
    let generated = run.load_stats(&run.path("stats/generated.json"))?;
    let truth = run.load_stats(&run.path("stats/truth.json"))?;
    run.histogram(&generated, &truth, &out.join("histogram"))?;
    let rows = fsd_table(run)?;
    write_file(&out.join("fsd_table.md"), fsd_markdown(&rows))?;
    let inversion: InversionSummary = read_json(&run.path("inversions/summary.json"))?;
    write_file(&out.join("reconstructions.png"), grid_png(&run.path("inversions"), &inversion.items)?)?;
    write_file(&out.join("index.html"), html(run, &rows, &inversion))?;
    let summary = ReportSummary { fsd_table: rows, withheld: run.cfg.withheld.map(|c| run.inventory.name(c).to_string()), inversion };
    write_file(&out.join("summary.json"), to_json(&summary))?;
    Ok(summary)
}
