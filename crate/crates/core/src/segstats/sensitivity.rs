use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fsd::fsd;
use super::record::SegStatsRecord;
use crate::error::{Error, Result};
use crate::scene::SegMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub n_per_split: usize,
    pub seed: u64,
    pub fsd_split: f64,
    pub split_a: SegStatsRecord,
    pub split_b: SegStatsRecord,
}

/// FSD between two disjoint random subsets of `maps`, each of size
/// `n_per_split`: the measurement noise floor at that sample size.
pub fn sensitivity_test(maps: &[SegMap], classes: &[u8], n_per_split: usize, seed: u64) -> Result<SensitivityReport> {
    if n_per_split < 2 || maps.len() < 2 * n_per_split {
        return Err(Error::InsufficientData(format!(
            "{} maps cannot form two splits of {n_per_split}",
            maps.len()
        )));
    }
    let mut order: Vec<usize> = (0..maps.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let split = |ix: &[usize]| SegStatsRecord::from_maps(ix.iter().map(|&i| &maps[i]), classes.to_vec());
    let split_a = split(&order[..n_per_split])?;
    let split_b = split(&order[n_per_split..2 * n_per_split])?;
    Ok(SensitivityReport { n_per_split, seed, fsd_split: fsd(&split_a, &split_b)?, split_a, split_b })
}
