//! Browser bindings for three operations on the procedural scene domain:
//! sample a scene with its label map, compare segmentation statistics of a
//! class-withheld distribution against the full one, and measure the FSD
//! noise floor at several sample sizes.
//!
//! The plain functions carry the logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors and return JSON text or
//! RGBA bytes.

use ganscope::export::{image_rgb, segmap_rgb};
use ganscope::scene::{make_dataset, make_segmaps, ClassInventory, DatasetConfig, DEFAULT_CANVAS};
use ganscope::segstats::{fsd_parts, histogram_report, sensitivity_test, HistogramRow, SegStatsRecord};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Most samples one call may draw; keeps the page responsive.
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassInfo {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassPixels {
    pub id: u8,
    pub name: String,
    pub pixels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneOut {
    pub size: usize,
    pub image_rgba: Vec<u8>,
    pub segmap_rgba: Vec<u8>,
    /// Foreground classes with at least one visible pixel.
    pub visible: Vec<ClassPixels>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub fsd: f64,
    pub mean_term: f64,
    pub covariance_term: f64,
    pub rows: Vec<HistogramRow>,
    pub svg: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FloorPoint {
    pub n: usize,
    pub fsd_split: f64,
}

fn withheld_id(inv: &ClassInventory, withheld: i32) -> Result<Option<u8>, String> {
    if withheld < 0 {
        return Ok(None);
    }
    match u8::try_from(withheld).ok().filter(|&c| inv.get(c).is_some()) {
        Some(c) => Ok(Some(c)),
        None => Err(format!("no class {withheld}; expected 1..={}", inv.len())),
    }
}

fn rgba(rgb: &[u8]) -> Vec<u8> {
    rgb.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

pub fn class_list() -> Vec<ClassInfo> {
    let inv = ClassInventory::default();
    inv.classes()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let id = i as u8 + 1;
            ClassInfo { id, name: c.name.clone(), color: ganscope::export::label_color(id, &inv) }
        })
        .collect()
}

/// Scene `seed`; with a class withheld it is the same scene minus that class.
pub fn scene(seed: u32, withheld: i32) -> Result<SceneOut, String> {
    let inv = ClassInventory::default();
    let cfg = DatasetConfig { n: 1, seed: seed.into(), canvas: DEFAULT_CANVAS, withheld: withheld_id(&inv, withheld)? };
    let s = make_dataset(&cfg, &inv).map_err(|e| e.to_string())?.remove(0);
    let counts = s.segmap.counts(inv.label_count()).map_err(|e| e.to_string())?;
    let visible = counts
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c > 0.0)
        .map(|(id, &c)| ClassPixels { id: id as u8, name: inv.name(id as u8).to_string(), pixels: c as usize })
        .collect();
    Ok(SceneOut {
        size: DEFAULT_CANVAS,
        image_rgba: rgba(&image_rgb(&s.image)),
        segmap_rgba: rgba(&segmap_rgb(&s.segmap, &inv)),
        visible,
    })
}

fn check_n(n: usize) -> Result<(), String> {
    if (2..=MAX_SAMPLES).contains(&n) {
        Ok(())
    } else {
        Err(format!("sample count {n} outside 2..={MAX_SAMPLES}"))
    }
}

/// Statistics of `n` scenes with `withheld` removed against `n` independent
/// full scenes: the best a generator that drops the class could score.
pub fn compare(n: usize, seed: u32, withheld: i32) -> Result<Comparison, String> {
    check_n(n)?;
    let inv = ClassInventory::default();
    let dropped = withheld_id(&inv, withheld)?;
    let stats = |seed: u64, withheld: Option<u8>| -> Result<SegStatsRecord, String> {
        let maps = make_segmaps(&DatasetConfig { n, seed, canvas: DEFAULT_CANVAS, withheld }, &inv).map_err(|e| e.to_string())?;
        SegStatsRecord::from_maps(&maps, inv.label_ids()).map_err(|e| e.to_string())
    };
    let seed = u64::from(seed);
    let g = stats(2 * seed, dropped)?;
    let t = stats(2 * seed + 1, None)?;
    let parts = fsd_parts(&g, &t).map_err(|e| e.to_string())?;
    let h = histogram_report(&g, &t, &inv, inv.len(), 400.0).map_err(|e| e.to_string())?;
    let title = match dropped {
        Some(c) => format!("Mean pixels per image: {} withheld vs. full", inv.name(c)),
        None => "Mean pixels per image: two full samples".to_string(),
    };
    Ok(Comparison {
        n,
        fsd: parts.value(),
        mean_term: parts.mean_term,
        covariance_term: parts.value() - parts.mean_term,
        svg: h.to_svg(&title),
        rows: h.rows,
    })
}

/// FSD between two disjoint splits of size `n` for each requested size.
pub fn noise_floor(sizes: &[usize], seed: u32) -> Result<Vec<FloorPoint>, String> {
    let largest = sizes.iter().copied().max().ok_or("no sample sizes given")?;
    sizes.iter().try_for_each(|&n| check_n(n))?;
    let inv = ClassInventory::default();
    let cfg = DatasetConfig { n: 2 * largest, seed: seed.into(), canvas: DEFAULT_CANVAS, withheld: None };
    let maps = make_segmaps(&cfg, &inv).map_err(|e| e.to_string())?;
    sizes
        .iter()
        .map(|&n| {
            let r = sensitivity_test(&maps, &inv.label_ids(), n, seed.into()).map_err(|e| e.to_string())?;
            Ok(FloorPoint { n, fsd_split: r.fsd_split })
        })
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serialises")
}

#[wasm_bindgen]
pub struct Scene(SceneOut);

#[wasm_bindgen]
impl Scene {
    /// `withheld < 0` keeps every class.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, withheld: i32) -> Result<Scene, JsError> {
        scene(seed, withheld).map(Scene).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn image(&self) -> Vec<u8> {
        self.0.image_rgba.clone()
    }

    pub fn segmap(&self) -> Vec<u8> {
        self.0.segmap_rgba.clone()
    }

    /// JSON list of `{id, name, pixels}`.
    pub fn visible(&self) -> String {
        to_json(&self.0.visible)
    }
}

/// JSON list of `{id, name, color}`.
#[wasm_bindgen]
pub fn classes() -> String {
    to_json(&class_list())
}

/// JSON `{n, fsd, mean_term, covariance_term, rows, svg}`.
#[wasm_bindgen(js_name = compareStats)]
pub fn compare_stats(n: usize, seed: u32, withheld: i32) -> Result<String, JsError> {
    compare(n, seed, withheld).map(|c| to_json(&c)).map_err(|e| JsError::new(&e))
}

/// JSON list of `{n, fsd_split}`.
#[wasm_bindgen(js_name = noiseFloor)]
pub fn noise_floor_js(sizes: Vec<u32>, seed: u32) -> Result<String, JsError> {
    let sizes: Vec<usize> = sizes.into_iter().map(|n| n as usize).collect();
    noise_floor(&sizes, seed).map(|p| to_json(&p)).map_err(|e| JsError::new(&e))
}
