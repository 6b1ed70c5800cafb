use super::classes::{background_level, ClassInventory, BACKGROUND};
use super::{Image, SegMap};
use crate::error::Result;

/// Pixels farther than this (L∞, in `[0, 1]` colour units) from every class
/// prototype are labelled background.
pub const BACKGROUND_THRESHOLD: f32 = 0.35;

/// Fixed colour-quantisation segmenter used on both real and generated
/// images.
///
/// Each pixel takes the nearest of the row's background level and the class
/// prototypes. A conservative 3×3 majority filter then relabels pixels whose
/// own label is nearly absent from their neighbourhood.
pub fn segment_image(image: &Image, inventory: &ClassInventory) -> Result<SegMap> {
    let n = image.size();
    let data = image.tensor().data();
    let plane = n * n;
    let mut raw = vec![BACKGROUND; plane];
    for y in 0..n {
        let bg = background_level(y, n);
        for x in 0..n {
            let px = [0, 1, 2].map(|c| (data[c * plane + y * n + x] + 1.0) / 2.0);
            let mut best = (BACKGROUND, px.iter().map(|v| (v - bg).abs()).fold(0.0, f32::max));
            for class in inventory.classes() {
                let d = px.iter().zip(&class.color).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
                if d < best.1 && d <= BACKGROUND_THRESHOLD {
                    best = (class.id, d);
                }
            }
            raw[y * n + x] = best.0;
        }
    }
    SegMap::new(n, majority_filter(&raw, n, inventory.label_count()))
}

fn majority_filter(raw: &[u8], n: usize, labels: usize) -> Vec<u8> {
    let mut out = raw.to_vec();
    let mut votes = vec![0u32; labels];
    for y in 0..n {
        for x in 0..n {
            votes.fill(0);
            let mut total = 0;
            for yy in y.saturating_sub(1)..(y + 2).min(n) {
                for xx in x.saturating_sub(1)..(x + 2).min(n) {
                    votes[raw[yy * n + xx] as usize] += 1;
                    total += 1;
                }
            }
            let own = votes[raw[y * n + x] as usize];
            let (mode, count) = votes.iter().enumerate().max_by_key(|(i, c)| (**c, usize::MAX - i)).unwrap();
            if 3 * own < total && 2 * count > total {
                out[y * n + x] = mode as u8;
            }
        }
    }
    out
}
