use serde::{Deserialize, Serialize};

use super::classes::{background_level, ClassDef, ClassInventory, ShapeFamily, BACKGROUND, MAX_JITTER};
use super::{Image, SegMap};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// One placed object. `placement` holds `(u_x, u_y, u_size)` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub class_id: u8,
    pub placement: [f32; 3],
    #[serde(default)]
    pub jitter: [f32; 3],
}

/// Axis-aligned extent of an instance in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl Footprint {
    pub fn of(class: &ClassDef, placement: [f32; 3], canvas: usize) -> Self {
        let side = canvas as f32;
        let [ux, uy, us] = placement;
        let (lo, hi) = class.size_range;
        let s = (lo + (hi - lo) * us) * side;
        let (w, h) = match class.shape {
            ShapeFamily::Rectangle => (s, s * class.aspect),
            _ => (s, s),
        };
        let spread = class.spread * side;
        let cx = (class.anchor.0 * side + (2.0 * ux - 1.0) * spread).clamp(w / 2.0, side - w / 2.0);
        let cy = (class.anchor.1 * side + (2.0 * uy - 1.0) * spread).clamp(h / 2.0, side - h / 2.0);
        Self { cx, cy, w, h }
    }

    /// Whether the pixel centre `(px, py)` lies inside the shape.
    pub fn covers(&self, shape: ShapeFamily, px: f32, py: f32) -> bool {
        let (dx, dy) = ((px - self.cx).abs(), (py - self.cy).abs());
        match shape {
            ShapeFamily::Rectangle => dx <= self.w / 2.0 && dy <= self.h / 2.0,
            ShapeFamily::Disk => {
                let r = self.w / 2.0;
                (px - self.cx).powi(2) + (py - self.cy).powi(2) <= r * r
            }
            ShapeFamily::Triangle => {
                let t = (py - (self.cy - self.h / 2.0)) / self.h;
                (0.0..=1.0).contains(&t) && dx <= t * self.w / 2.0
            }
            ShapeFamily::HorizontalBars => {
                let band = ((py - (self.cy - self.h / 2.0)) / 2.0).floor() as i64;
                dx <= self.w / 2.0 && dy <= self.h / 2.0 && band.rem_euclid(2) == 0
            }
        }
    }

    /// Pixel index range `[x0, x1) × [y0, y1)` that can contain covered centres.
    fn pixel_bounds(&self, canvas: usize) -> (usize, usize, usize, usize) {
        let lo = |c: f32, e: f32| ((c - e / 2.0 - 0.5).floor().max(0.0)) as usize;
        let hi = |c: f32, e: f32| (((c + e / 2.0 + 0.5).ceil()) as usize).min(canvas);
        (lo(self.cx, self.w), hi(self.cx, self.w), lo(self.cy, self.h), hi(self.cy, self.h))
    }
}

/// Structured description of a scene: instances in ascending class order,
/// at most one per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub canvas: usize,
    pub instances: Vec<Instance>,
}

impl SceneSpec {
    pub fn validate(&self, inventory: &ClassInventory) -> Result<()> {
        if self.canvas < 8 {
            return Err(Error::InvalidArgument(format!("canvas {} is too small", self.canvas)));
        }
        let mut last = BACKGROUND;
        for inst in &self.instances {
            if inventory.get(inst.class_id).is_none() {
                return Err(Error::InvalidArgument(format!("unknown class id {}", inst.class_id)));
            }
            if inst.class_id <= last {
                return Err(Error::InvalidArgument("instances must be in strictly ascending class order".into()));
            }
            last = inst.class_id;
            if inst.placement.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(Error::InvalidArgument(format!("placement of class {} outside [0, 1]", inst.class_id)));
            }
            if inst.jitter.iter().any(|j| j.abs() > MAX_JITTER + 1e-6) {
                return Err(Error::InvalidArgument(format!("jitter of class {} too large", inst.class_id)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, class_id: u8) -> bool {
        self.instances.iter().any(|i| i.class_id == class_id)
    }
}

fn paint<F: FnMut(usize, usize)>(inst: &Instance, class: &ClassDef, canvas: usize, mut f: F) {
    let fp = Footprint::of(class, inst.placement, canvas);
    let (x0, x1, y0, y1) = fp.pixel_bounds(canvas);
    for y in y0..y1 {
        for x in x0..x1 {
            if fp.covers(class.shape, x as f32 + 0.5, y as f32 + 0.5) {
                f(x, y);
            }
        }
    }
}

/// Rasterises a scene to an RGB image in `[-1, 1]`.
pub fn render(scene: &SceneSpec, inventory: &ClassInventory) -> Result<Image> {
    scene.validate(inventory)?;
    let n = scene.canvas;
    let mut rgb = vec![0.0f32; 3 * n * n];
    for y in 0..n {
        let g = background_level(y, n);
        for c in 0..3 {
            rgb[c * n * n + y * n..c * n * n + (y + 1) * n].fill(g);
        }
    }
    for inst in &scene.instances {
        let class = inventory.get(inst.class_id).expect("validated");
        let color: Vec<f32> =
            (0..3).map(|c| (class.color[c] + inst.jitter[c]).clamp(0.0, 1.0)).collect();
        paint(inst, class, n, |x, y| {
            for c in 0..3 {
                rgb[c * n * n + y * n + x] = color[c];
            }
        });
    }
    for v in &mut rgb {
        *v = *v * 2.0 - 1.0;
    }
    Image::new(Tensor::new(vec![3, n, n], rgb)?)
}

/// Ground-truth label map straight from the scene geometry.
pub fn segment_exact(scene: &SceneSpec, inventory: &ClassInventory) -> Result<SegMap> {
    scene.validate(inventory)?;
    let n = scene.canvas;
    let mut labels = vec![BACKGROUND; n * n];
    for inst in &scene.instances {
        let class = inventory.get(inst.class_id).expect("validated");
        paint(inst, class, n, |x, y| labels[y * n + x] = inst.class_id);
    }
    SegMap::new(n, labels)
}
