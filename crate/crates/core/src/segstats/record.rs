use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::SegMap;

/// Streaming per-class pixel-count statistics.
///
/// Uses Welford updates for the mean and co-moment matrix so partial
/// accumulators can be merged (Chan et al. pairwise combination).
#[derive(Clone, Debug, PartialEq)]
pub struct StatsAccumulator {
    classes: Vec<u8>,
    resolution: Option<usize>,
    n: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl StatsAccumulator {
    pub fn new(classes: Vec<u8>) -> Self {
        let c = classes.len();
        Self { classes, resolution: None, n: 0, mean: vec![0.0; c], comoment: vec![0.0; c * c] }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push_counts(&mut self, counts: &[f64]) -> Result<()> {
        let c = self.classes.len();
        if counts.len() != c {
            return Err(Error::ClassMismatch(format!("{} counts for {c} classes", counts.len())));
        }
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = counts.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..c {
            let after = counts[i] - self.mean[i];
            for j in 0..c {
                self.comoment[i * c + j] += delta[j] * after;
            }
        }
        Ok(())
    }

    pub fn push(&mut self, map: &SegMap) -> Result<()> {
        match self.resolution {
            Some(r) if r != map.size() => {
                return Err(Error::InvalidArgument(format!(
                    "segmentation map is {}×{0}, expected {r}×{r}",
                    map.size()
                )))
            }
            _ => self.resolution = Some(map.size()),
        }
        let max = *self.classes.iter().max().unwrap_or(&0) as usize;
        let mut by_label = vec![0.0; max + 1];
        for &l in map.labels() {
            match by_label.get_mut(l as usize) {
                Some(v) if self.classes.contains(&l) => *v += 1.0,
                _ => return Err(Error::ClassMismatch(format!("label {l} not in class list"))),
            }
        }
        let counts: Vec<f64> = self.classes.iter().map(|&c| by_label[c as usize]).collect();
        self.push_counts(&counts)
    }

    /// Associative combination of two partial accumulators.
    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::ClassMismatch("cannot merge statistics over different classes".into()));
        }
        if let (Some(a), Some(b)) = (self.resolution, other.resolution) {
            if a != b {
                return Err(Error::InvalidArgument(format!("resolutions {a} and {b} differ")));
            }
        }
        if other.n == 0 {
            return Ok(());
        }
        self.resolution = self.resolution.or(other.resolution);
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let c = self.classes.len();
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..c {
            for j in 0..c {
                self.comoment[i * c + j] += other.comoment[i * c + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn finish(&self) -> Result<SegStatsRecord> {
        if self.n < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 maps, got {}", self.n)));
        }
        let c = self.classes.len();
        let d = (self.n - 1) as f64;
        let mut cov: Vec<f64> = self.comoment.iter().map(|v| v / d).collect();
        for i in 0..c {
            for j in 0..i {
                let s = 0.5 * (cov[i * c + j] + cov[j * c + i]);
                cov[i * c + j] = s;
                cov[j * c + i] = s;
            }
        }
        Ok(SegStatsRecord { classes: self.classes.clone(), mean: self.mean.clone(), cov, n: self.n })
    }
}

/// Mean and unbiased covariance of per-class pixel counts per image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegStatsRecord {
    pub classes: Vec<u8>,
    /// Mean pixels per image, one entry per class.
    pub mean: Vec<f64>,
    /// Row-major `C × C` covariance, divisor `N − 1`.
    pub cov: Vec<f64>,
    pub n: u64,
}

impl SegStatsRecord {
    /// Statistics of a finite collection of maps.
    pub fn from_maps<'a>(maps: impl IntoIterator<Item = &'a SegMap>, classes: Vec<u8>) -> Result<Self> {
        let mut acc = StatsAccumulator::new(classes);
        for m in maps {
            acc.push(m)?;
        }
        acc.finish()
    }

    pub fn dim(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.classes.len();
        if self.mean.len() != c || self.cov.len() != c * c {
            return Err(Error::Format(format!(
                "record has {} means and {} covariance entries for {c} classes",
                self.mean.len(),
                self.cov.len()
            )));
        }
        if self.n < 2 {
            return Err(Error::InsufficientData(format!("record has N = {}", self.n)));
        }
        if self.mean.iter().chain(&self.cov).any(|v| !v.is_finite()) {
            return Err(Error::Format("record contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn mean_of(&self, class: u8) -> Option<f64> {
        self.classes.iter().position(|&c| c == class).map(|i| self.mean[i])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }
}
