//! PNG and JSON export of datasets and inversion results.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::inversion::{InversionResult, Method};
use crate::scene::{segment_image, ClassInventory, DatasetConfig, Image, Sample, SceneSpec, SegMap};

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(data).map_err(png_err)?;
    }
    Ok(out)
}

fn decode(bytes: &[u8], color: png::ColorType) -> Result<(usize, usize, Vec<u8>)> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != color || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png(format!("expected 8-bit {color:?}, found {:?} {:?}", info.bit_depth, info.color_type)));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

/// 8-bit RGB PNG from interleaved bytes.
pub fn rgb_png(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != 3 * width * height {
        return Err(Error::Png(format!("{} bytes for a {width}x{height} RGB image", rgb.len())));
    }
    encode(width, height, png::ColorType::Rgb, rgb)
}

/// Width, height and interleaved bytes of an 8-bit RGB PNG.
pub fn rgb_from_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    decode(bytes, png::ColorType::Rgb)
}

/// `[-1, 1]` to `0..=255`, rounding to nearest.
pub fn to_u8(v: f32) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0).round()) as u8
}

/// Interleaved RGB bytes of an image.
pub fn image_rgb(img: &Image) -> Vec<u8> {
    let n = img.size();
    let d = img.tensor().data();
    let mut out = Vec::with_capacity(3 * n * n);
    for p in 0..n * n {
        for c in 0..3 {
            out.push(to_u8(d[c * n * n + p]));
        }
    }
    out
}

/// 8-bit RGB PNG of an image.
pub fn image_png(img: &Image) -> Result<Vec<u8>> {
    encode(img.size(), img.size(), png::ColorType::Rgb, &image_rgb(img))
}

/// Reads an 8-bit RGB PNG back into `[-1, 1]`.
pub fn image_from_png(bytes: &[u8]) -> Result<Image> {
    let (w, h, px) = decode(bytes, png::ColorType::Rgb)?;
    if w != h {
        return Err(Error::Png(format!("images must be square, got {w}x{h}")));
    }
    let mut data = vec![0.0; 3 * w * h];
    for p in 0..w * h {
        for c in 0..3 {
            data[c * w * h + p] = px[3 * p + c] as f32 / 255.0 * 2.0 - 1.0;
        }
    }
    Image::new(Tensor::new(vec![3, h, w], data)?)
}

/// Single-channel PNG holding raw label ids.
pub fn segmap_png(map: &SegMap) -> Result<Vec<u8>> {
    encode(map.size(), map.size(), png::ColorType::Grayscale, map.labels())
}

pub fn segmap_from_png(bytes: &[u8]) -> Result<SegMap> {
    let (w, h, px) = decode(bytes, png::ColorType::Grayscale)?;
    if w != h {
        return Err(Error::Png(format!("segmaps must be square, got {w}x{h}")));
    }
    SegMap::new(w, px)
}

/// Display colour for a label: the class colour, dark grey for background.
pub fn label_color(label: u8, inventory: &ClassInventory) -> [u8; 3] {
    match inventory.get(label) {
        Some(c) => c.color.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        None => [40, 40, 40],
    }
}

/// Interleaved RGB bytes of a colour-coded segmentation.
pub fn segmap_rgb(map: &SegMap, inventory: &ClassInventory) -> Vec<u8> {
    map.labels().iter().flat_map(|&l| label_color(l, inventory)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub index: usize,
    pub image: String,
    pub segmap: String,
    pub latent: Vec<f32>,
    pub scene: SceneSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub inventory: ClassInventory,
    pub items: Vec<ManifestItem>,
}

/// Writes `images/NNNNN.png`, `segmaps/NNNNN.png` and `manifest.json`
/// under `dir`.
pub fn write_dataset(dir: &Path, cfg: &DatasetConfig, inventory: &ClassInventory, samples: &[Sample]) -> Result<Manifest> {
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("segmaps"))?;
    let mut items = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let image = format!("images/{i:05}.png");
        let segmap = format!("segmaps/{i:05}.png");
        std::fs::write(dir.join(&image), image_png(&s.image)?)?;
        std::fs::write(dir.join(&segmap), segmap_png(&s.segmap)?)?;
        items.push(ManifestItem { index: i, image, segmap, latent: s.latent.clone(), scene: s.scene.clone() });
    }
    let manifest = Manifest { config: cfg.clone(), inventory: inventory.clone(), items };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn read_at(path: PathBuf) -> Result<Vec<u8>> {
    std::fs::read(&path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_slice(&read_at(dir.join("manifest.json"))?)?)
}

/// Loads every segmap listed in a dataset manifest.
pub fn read_segmaps(dir: &Path, manifest: &Manifest) -> Result<Vec<SegMap>> {
    manifest.items.iter().map(|it| segmap_from_png(&read_at(dir.join(&it.segmap))?)).collect()
}

pub fn read_image(dir: &Path, item: &ManifestItem) -> Result<Image> {
    image_from_png(&read_at(dir.join(&item.image))?)
}

/// Gap between panel tiles, in output pixels.
const GAP: usize = 2;

/// Two-by-two panel: input top-left, reconstruction top-right, their
/// segmentations below. Each tile is upscaled by `scale`.
pub fn panel_png(input: &Image, recon: &Image, inventory: &ClassInventory, scale: usize) -> Result<Vec<u8>> {
    if input.size() != recon.size() || scale == 0 {
        return Err(Error::InvalidArgument("panel tiles must share a size and scale ≥ 1".into()));
    }
    let n = input.size();
    let tile = n * scale;
    let side = 2 * tile + 3 * GAP;
    let mut px = vec![255u8; 3 * side * side];
    let tiles = [
        image_rgb(input),
        image_rgb(recon),
        segmap_rgb(&segment_image(input, inventory)?, inventory),
        segmap_rgb(&segment_image(recon, inventory)?, inventory),
    ];
    for (t, rgb) in tiles.iter().enumerate() {
        let (ox, oy) = (GAP + (t % 2) * (tile + GAP), GAP + (t / 2) * (tile + GAP));
        for y in 0..tile {
            for x in 0..tile {
                let src = 3 * ((y / scale) * n + x / scale);
                let dst = 3 * ((oy + y) * side + ox + x);
                px[dst..dst + 3].copy_from_slice(&rgb[src..src + 3]);
            }
        }
    }
    encode(side, side, png::ColorType::Rgb, &px)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionRecord {
    pub method: Method,
    pub final_loss: f32,
    pub delta_energy: f64,
    pub pixel_correlation: f64,
    /// Fraction of each class's input pixels that the reconstruction's
    /// segmentation gives the same label, indexed by class id.
    pub class_recall: Vec<Option<f64>>,
    pub z0: Vec<f32>,
    pub z: Vec<f32>,
    pub loss_trace: Vec<f32>,
}

/// Per-class recall of `recon` against `truth`; `None` where the class has
/// no pixels in `truth`.
pub fn class_recall(truth: &SegMap, recon: &SegMap, num_labels: usize) -> Result<Vec<Option<f64>>> {
    if truth.size() != recon.size() {
        return Err(Error::InvalidArgument("segmaps differ in size".into()));
    }
    let mut hit = vec![0usize; num_labels];
    let mut total = vec![0usize; num_labels];
    for (&t, &r) in truth.labels().iter().zip(recon.labels()) {
        let t = t as usize;
        if t >= num_labels {
            return Err(Error::ClassMismatch(format!("label {t} outside 0..{num_labels}")));
        }
        total[t] += 1;
        if t == r as usize {
            hit[t] += 1;
        }
    }
    Ok(hit.iter().zip(&total).map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64)).collect())
}

/// Writes `input.png`, `reconstruction.png`, both segmentations, the
/// combined `panel.png` and `result.json` into `dir`.
pub fn write_inversion(
    dir: &Path,
    input: &Image,
    truth_seg: Option<&SegMap>,
    result: &InversionResult,
    inventory: &ClassInventory,
) -> Result<InversionRecord> {
    std::fs::create_dir_all(dir)?;
    let seg_in = segment_image(input, inventory)?;
    let seg_out = segment_image(&result.reconstruction, inventory)?;
    std::fs::write(dir.join("input.png"), image_png(input)?)?;
    std::fs::write(dir.join("reconstruction.png"), image_png(&result.reconstruction)?)?;
    std::fs::write(dir.join("input_seg.png"), segmap_png(&seg_in)?)?;
    std::fs::write(dir.join("reconstruction_seg.png"), segmap_png(&seg_out)?)?;
    std::fs::write(dir.join("panel.png"), panel_png(input, &result.reconstruction, inventory, 4)?)?;
    let pixels = crate::inversion::pooled_correlation([(input.tensor().data(), result.reconstruction.tensor().data())])?;
    let record = InversionRecord {
        method: result.method,
        final_loss: result.final_loss(),
        delta_energy: result.delta_energy(),
        pixel_correlation: pixels.value,
        class_recall: class_recall(truth_seg.unwrap_or(&seg_in), &seg_out, inventory.label_count())?,
        z0: result.z0.clone(),
        z: result.z.clone(),
        loss_trace: result.loss_trace.clone(),
    };
    std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}
