use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum L∞ distance between any two prototype colours (and between a
/// prototype and the background gradient).
pub const MIN_COLOR_SEPARATION: f32 = 0.25;

/// Largest per-channel colour jitter applied to a rendered instance.
pub const MAX_JITTER: f32 = 0.08;

pub const BACKGROUND: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    Rectangle,
    Disk,
    Triangle,
    /// Thin parallel stripes, two pixels on and two off.
    HorizontalBars,
}

/// One foreground object class.
///
/// Sizes, anchors and spreads are fractions of the canvas side. An instance
/// is centred at `anchor ± spread` (clamped so it stays on the canvas) and
/// its width is drawn from `size_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDef {
    pub id: u8,
    pub name: String,
    pub color: [f32; 3],
    pub shape: ShapeFamily,
    pub size_range: (f32, f32),
    pub presence: f64,
    /// Height over width; only rectangles use it.
    pub aspect: f32,
    pub anchor: (f32, f32),
    pub spread: f32,
}

/// Background colour of row `y` on a canvas of side `size`, in `[0, 1]`.
pub fn background_level(y: usize, size: usize) -> f32 {
    0.05 + 0.15 * ((y as f32 + 0.5) / size as f32)
}

fn linf(a: [f32; 3], b: [f32; 3]) -> f32 {
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

/// Ordered foreground classes with ids `1..=n`; id 0 is background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassInventory {
    classes: Vec<ClassDef>,
}

impl ClassInventory {
    pub fn new(classes: Vec<ClassDef>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidArgument("class inventory is empty".into()));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.id as usize != i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "class {:?} has id {}, expected {}",
                    c.name,
                    c.id,
                    i + 1
                )));
            }
            if !(0.0..=1.0).contains(&c.presence) {
                return Err(Error::InvalidArgument(format!(
                    "class {:?} presence {} outside [0, 1]",
                    c.name, c.presence
                )));
            }
            if c.color.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("class {:?} colour outside [0, 1]", c.name)));
            }
            let (lo, hi) = c.size_range;
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) || c.aspect <= 0.0 || c.aspect * hi > 1.0 {
                return Err(Error::InvalidArgument(format!("class {:?} has an invalid size range", c.name)));
            }
            for other in &classes[..i] {
                let d = linf(c.color, other.color);
                if d < MIN_COLOR_SEPARATION {
                    return Err(Error::InvalidArgument(format!(
                        "classes {:?} and {:?} are only {d:.3} apart in colour",
                        other.name, c.name
                    )));
                }
            }
            let darkest = background_level(0, 1);
            let lightest = background_level(0, 1).max(0.2);
            for g in [darkest, lightest] {
                if linf(c.color, [g; 3]) < MIN_COLOR_SEPARATION {
                    return Err(Error::InvalidArgument(format!(
                        "class {:?} is too close to the background",
                        c.name
                    )));
                }
            }
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: u8) -> Option<&ClassDef> {
        id.checked_sub(1).and_then(|i| self.classes.get(i as usize))
    }

    /// Foreground and background: `0..=n`.
    pub fn label_count(&self) -> usize {
        self.classes.len() + 1
    }

    pub fn label_ids(&self) -> Vec<u8> {
        (0..=self.classes.len() as u8).collect()
    }

    pub fn name(&self, id: u8) -> &str {
        if id == BACKGROUND {
            "background"
        } else {
            self.get(id).map_or("unknown", |c| c.name.as_str())
        }
    }

    /// Copy in which class `id` never appears.
    pub fn withholding(&self, id: u8) -> Result<Self> {
        if self.get(id).is_none() {
            return Err(Error::InvalidArgument(format!("cannot withhold class {id}: not in inventory")));
        }
        let mut out = self.clone();
        out.classes[id as usize - 1].presence = 0.0;
        Ok(out)
    }

    /// Stable fingerprint recorded in weight files.
    pub fn fingerprint(&self) -> String {
        let mut h = DefaultHasher::new();
        for c in &self.classes {
            c.name.hash(&mut h);
            c.shape.hash(&mut h);
            for v in c.color {
                v.to_bits().hash(&mut h);
            }
            c.presence.to_bits().hash(&mut h);
        }
        format!("{:016x}", h.finish())
    }
}

impl Default for ClassInventory {
    /// Eight classes loosely modelled on an indoor scene. The fence is the
    /// high-frequency class.
    fn default() -> Self {
        use ShapeFamily::*;
        let spec: [(&str, [f32; 3], ShapeFamily, (f32, f32), f64, f32, (f32, f32), f32); 8] = [
            ("bed", [0.9, 0.2, 0.2], Rectangle, (0.40, 0.55), 0.75, 0.5, (16.0, 24.0), 4.0),
            ("plant", [0.2, 0.8, 0.2], Disk, (0.22, 0.32), 0.70, 1.0, (6.0, 22.0), 3.0),
            ("lamp", [0.2, 0.3, 0.9], Triangle, (0.25, 0.35), 0.65, 1.0, (26.0, 10.0), 3.0),
            ("fence", [0.95, 0.9, 0.3], HorizontalBars, (0.35, 0.45), 0.60, 1.0, (10.0, 10.0), 3.0),
            ("rug", [0.8, 0.3, 0.9], Rectangle, (0.35, 0.50), 0.60, 0.35, (18.0, 28.0), 3.0),
            ("ball", [0.2, 0.85, 0.85], Disk, (0.15, 0.25), 0.55, 1.0, (24.0, 20.0), 4.0),
            ("door", [0.95, 0.6, 0.1], Rectangle, (0.22, 0.30), 0.50, 1.6, (20.0, 8.0), 3.0),
            ("tent", [0.9, 0.9, 0.9], Triangle, (0.20, 0.30), 0.50, 1.0, (6.0, 6.0), 2.0),
        ];
        let classes = spec
            .into_iter()
            .enumerate()
            .map(|(i, (name, color, shape, size_range, presence, aspect, (ax, ay), spread))| ClassDef {
                id: i as u8 + 1,
                name: name.to_string(),
                color,
                shape,
                size_range,
                presence,
                aspect,
                anchor: (ax / 32.0, ay / 32.0),
                spread: spread / 32.0,
            })
            .collect();
        Self::new(classes).expect("default inventory is valid")
    }
}
