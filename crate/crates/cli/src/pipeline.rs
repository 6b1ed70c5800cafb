use std::path::{Path, PathBuf};
use std::time::Instant;

use ganscope::autodiff::Tensor;
use ganscope::export::{self, InversionRecord, Manifest};
use ganscope::generator::{self, GeneratorNet, TrainingSet};
use ganscope::inversion::{pooled_correlation, EncoderStack, Inverter, Method};
use ganscope::scene::{
    make_dataset, make_segmaps, render, sample_latents, segment_exact, segment_image, ClassInventory, DatasetConfig, Image, Sample,
    SegMap,
};
use ganscope::segstats::{fsd_parts, histogram_report, sensitivity_test, FsdParts, SegStatsRecord, SensitivityReport};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Seeds};
use crate::{CliError, CliResult};

/// Latents per generator batch when sampling statistics. Fixed so results
/// do not depend on the worker count.
const SAMPLE_CHUNK: usize = 64;

pub(crate) fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| data_err(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| data_err(path, e))
}

pub(crate) fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| data_err(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| data_err(path, e))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// What `run.json` records about a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    pub inventory_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsdRecord {
    pub a: String,
    pub b: String,
    pub fsd: f64,
    pub parts: FsdParts,
}

/// Pooled results of inverting a set of images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionSummary {
    pub method: Method,
    pub withheld: Option<u8>,
    pub items: Vec<String>,
    /// Share of the withheld class's true pixels that the reconstructions'
    /// segmentations label as that class.
    pub withheld_recall: Option<f64>,
    /// The same share over all other foreground classes.
    pub retained_recall: Option<f64>,
    pub pixel_correlation: f64,
    pub mean_final_loss: f64,
}

/// A resolved configuration bound to its run directory.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub inventory: ClassInventory,
    pub seeds: Seeds,
}

impl Run {
    pub fn new(cfg: ExperimentConfig) -> CliResult<Self> {
        cfg.validate()?;
        let inventory = cfg.load_inventory()?;
        let seeds = cfg.seeds();
        Ok(Self { cfg, inventory, seeds })
    }

    pub fn dir(&self) -> &Path {
        &self.cfg.out
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    pub fn train_dir(&self) -> PathBuf {
        self.path("data/train")
    }

    pub fn truth_dir(&self) -> PathBuf {
        self.path("data/truth")
    }

    pub fn generator_path(&self) -> PathBuf {
        self.path("weights/generator.gscp")
    }

    pub fn encoder_path(&self) -> PathBuf {
        self.path("weights/encoder.gscp")
    }

    pub fn write_manifest(&self) -> CliResult<()> {
        let m = RunManifest { config: self.cfg.clone(), seeds: self.seeds, inventory_fingerprint: self.inventory.fingerprint() };
        write_file(&self.path("run.json"), to_json(&m))?;
        write_file(&self.path("config.toml"), self.cfg.to_toml())
    }

    pub fn train_dataset_config(&self, n: Option<usize>) -> DatasetConfig {
        DatasetConfig { n: n.unwrap_or(self.cfg.data.train), seed: self.seeds.train_data, canvas: self.cfg.canvas, withheld: self.cfg.withheld }
    }

    pub fn truth_dataset_config(&self, n: Option<usize>) -> DatasetConfig {
        DatasetConfig { n: n.unwrap_or(self.cfg.data.truth), seed: self.seeds.truth_data, canvas: self.cfg.canvas, withheld: None }
    }

    pub fn gen_data(&self, cfg: &DatasetConfig, out: &Path) -> CliResult<Manifest> {
        let t = Instant::now();
        let samples = make_dataset(cfg, &self.inventory)?;
        let manifest = export::write_dataset(out, cfg, &self.inventory, &samples).map_err(|e| data_err(out, e))?;
        info!("wrote {} samples to {} in {:.1?}", samples.len(), out.display(), t.elapsed());
        Ok(manifest)
    }

    /// Rebuilds training samples from a dataset manifest. Images are
    /// re-rendered from the recorded scenes, so they are exact rather than
    /// 8-bit quantised.
    pub fn load_samples(&self, dir: &Path) -> CliResult<Vec<Sample>> {
        let manifest = export::read_manifest(dir).map_err(|e| data_err(dir, e))?;
        if manifest.inventory.fingerprint() != self.inventory.fingerprint() {
            return Err(CliError::Data(format!("{}: dataset was made with a different class inventory", dir.display())));
        }
        manifest
            .items
            .par_iter()
            .map(|it| {
                Ok(Sample {
                    latent: it.latent.clone(),
                    image: render(&it.scene, &manifest.inventory)?,
                    segmap: segment_exact(&it.scene, &manifest.inventory)?,
                    scene: it.scene.clone(),
                })
            })
            .collect::<Result<Vec<_>, ganscope::Error>>()
            .map_err(|e| data_err(dir, e))
    }

    pub fn train_gen(&self, data: &Path, out: &Path) -> CliResult<GeneratorNet> {
        let samples = self.load_samples(data)?;
        let set = TrainingSet::from_samples(&samples).map_err(|e| data_err(data, e))?;
        let g = &self.cfg.generator;
        let mut net = GeneratorNet::standard(g.latent_dim, g.split, &self.inventory.fingerprint(), self.seeds.generator_init)?;
        let t = Instant::now();
        let report = generator::train(&mut net, &set, &self.cfg.train_config())?;
        info!(
            "trained generator for {} steps in {:.1?}; final loss {:.4}",
            report.losses.len(),
            t.elapsed(),
            report.tail_mean(100)
        );
        write_file(out, net.to_bytes()?)?;
        Ok(net)
    }

    pub fn load_generator(&self, path: &Path) -> CliResult<GeneratorNet> {
        let g = GeneratorNet::from_bytes(&read_file(path)?).map_err(|e| data_err(path, e))?;
        if g.inventory_fingerprint() != self.inventory.fingerprint() {
            return Err(CliError::Data(format!("{}: generator was trained on a different class inventory", path.display())));
        }
        Ok(g)
    }

    pub fn load_encoder(&self, path: &Path) -> CliResult<EncoderStack> {
        EncoderStack::from_bytes(&read_file(path)?).map_err(|e| data_err(path, e))
    }

    pub fn train_enc(&self, gen_path: &Path, out: &Path) -> CliResult<EncoderStack> {
        let gen = self.load_generator(gen_path)?;
        let t = Instant::now();
        let stack = EncoderStack::train(&gen, &self.cfg.encoder_config())?;
        info!("trained encoders in {:.1?}", t.elapsed());
        write_file(out, stack.to_bytes()?)?;
        Ok(stack)
    }

    /// Segmentations of `n` generated images.
    pub fn generated_segmaps(&self, gen: &GeneratorNet, n: usize, seed: u64) -> CliResult<Vec<SegMap>> {
        let z = sample_latents(n, gen.latent_dim(), seed);
        let chunks: Vec<Vec<SegMap>> = z
            .par_chunks(SAMPLE_CHUNK)
            .map(|chunk| -> Result<Vec<SegMap>, ganscope::Error> {
                let x = gen.forward(&Tensor::new(vec![chunk.len(), gen.latent_dim()], chunk.concat())?)?;
                (0..chunk.len()).map(|i| segment_image(&Image::new(x.item(i)?)?, &self.inventory)).collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    pub fn stats_of_generator(&self, gen_path: &Path, n: usize, out: &Path) -> CliResult<SegStatsRecord> {
        let gen = self.load_generator(gen_path)?;
        let maps = self.generated_segmaps(&gen, n, self.seeds.generated_stats)?;
        let rec = SegStatsRecord::from_maps(&maps, self.inventory.label_ids())?;
        write_file(out, rec.to_json()?)?;
        Ok(rec)
    }

    pub fn stats_of_dataset(&self, dir: &Path, out: &Path) -> CliResult<SegStatsRecord> {
        let manifest = export::read_manifest(dir).map_err(|e| data_err(dir, e))?;
        let maps = export::read_segmaps(dir, &manifest).map_err(|e| data_err(dir, e))?;
        let rec = SegStatsRecord::from_maps(&maps, self.inventory.label_ids()).map_err(|e| data_err(dir, e))?;
        write_file(out, rec.to_json()?)?;
        Ok(rec)
    }

    pub fn load_stats(&self, path: &Path) -> CliResult<SegStatsRecord> {
        let text = String::from_utf8(read_file(path)?).map_err(|e| data_err(path, e))?;
        SegStatsRecord::from_json(&text).map_err(|e| data_err(path, e))
    }

    /// Writes `<stem>.csv` and `<stem>.svg` next to each other.
    pub fn histogram(&self, generated: &SegStatsRecord, truth: &SegStatsRecord, stem: &Path) -> CliResult<()> {
        let h = histogram_report(generated, truth, &self.inventory, self.cfg.stats.top_k, self.cfg.stats.clip_ceiling)?;
        write_file(&stem.with_extension("csv"), h.to_csv())?;
        write_file(&stem.with_extension("svg"), h.to_svg("Mean pixels per image: generated vs. truth"))
    }

    pub fn fsd(&self, a: &Path, b: &Path, out: &Path) -> CliResult<FsdRecord> {
        let (ra, rb) = (self.load_stats(a)?, self.load_stats(b)?);
        let parts = fsd_parts(&ra, &rb)?;
        let rec = FsdRecord { a: display_name(a), b: display_name(b), fsd: parts.value(), parts };
        write_file(out, to_json(&rec))?;
        Ok(rec)
    }

    /// Noise floor from a dataset on disk, or from `2n` fresh truth scenes.
    pub fn sensitivity(&self, data: Option<&Path>, n: usize, out: &Path) -> CliResult<SensitivityReport> {
        let maps = match data {
            Some(dir) => {
                let manifest = export::read_manifest(dir).map_err(|e| data_err(dir, e))?;
                export::read_segmaps(dir, &manifest).map_err(|e| data_err(dir, e))?
            }
            None => make_segmaps(
                &DatasetConfig { n: 2 * n, seed: self.seeds.sensitivity, canvas: self.cfg.canvas, withheld: None },
                &self.inventory,
            )?,
        };
        let report = sensitivity_test(&maps, &self.inventory.label_ids(), n, self.seeds.sensitivity)?;
        write_file(out, to_json(&report))?;
        Ok(report)
    }

    /// Inverts images, writing one bundle per image under `out` and a
    /// `summary.json`. Truth segmentations, when given, score recall.
    pub fn invert(
        &self,
        gen: &GeneratorNet,
        stack: &EncoderStack,
        method: Method,
        items: &[(String, Image, Option<SegMap>)],
        out: &Path,
    ) -> CliResult<InversionSummary> {
        let inverter = Inverter::new(gen, stack, self.cfg.inversion_config())?;
        let images: Vec<Image> = items.iter().map(|(_, x, _)| x.clone()).collect();
        let t = Instant::now();
        let results = inverter.invert_all(&images, method, self.seeds.inversion)?;
        info!("inverted {} images with method {method} in {:.1?}", images.len(), t.elapsed());
        let label_count = self.inventory.label_count();
        let (mut hit_w, mut tot_w, mut hit_r, mut tot_r) = (0.0, 0.0, 0.0, 0.0);
        let mut records: Vec<InversionRecord> = Vec::new();
        for ((name, x, truth), res) in items.iter().zip(&results) {
            let rec = export::write_inversion(&out.join(name), x, truth.as_ref(), res, &self.inventory)?;
            let truth_map = match truth {
                Some(m) => m.clone(),
                None => segment_image(x, &self.inventory)?,
            };
            let counts = truth_map.counts(label_count)?;
            for (c, r) in rec.class_recall.iter().enumerate().skip(1) {
                if let Some(r) = r {
                    if Some(c as u8) == self.cfg.withheld {
                        hit_w += r * counts[c];
                        tot_w += counts[c];
                    } else {
                        hit_r += r * counts[c];
                        tot_r += counts[c];
                    }
                }
            }
            records.push(rec);
        }
        let pixels = pooled_correlation(items.iter().zip(&results).map(|((_, x, _), r)| (x.tensor().data(), r.reconstruction.tensor().data())))?;
        let ratio = |h: f64, t: f64| (t > 0.0).then(|| h / t);
        let summary = InversionSummary {
            method,
            withheld: self.cfg.withheld,
            items: items.iter().map(|(n, _, _)| n.clone()).collect(),
            withheld_recall: ratio(hit_w, tot_w),
            retained_recall: ratio(hit_r, tot_r),
            pixel_correlation: pixels.value,
            mean_final_loss: records.iter().map(|r| r.final_loss as f64).sum::<f64>() / records.len().max(1) as f64,
        };
        write_file(&out.join("summary.json"), to_json(&summary))?;
        Ok(summary)
    }

    /// The first `count` images of a dataset that contain the withheld
    /// class (any images when nothing is withheld), with exact segmaps.
    pub fn witness_images(&self, dir: &Path, count: usize) -> CliResult<Vec<(String, Image, Option<SegMap>)>> {
        let manifest = export::read_manifest(dir).map_err(|e| data_err(dir, e))?;
        let picked: Vec<_> = manifest
            .items
            .iter()
            .filter(|it| self.cfg.withheld.is_none_or(|c| it.scene.contains(c)))
            .take(count)
            .collect();
        if picked.is_empty() {
            return Err(CliError::Data(format!("{}: no image contains the withheld class", dir.display())));
        }
        picked
            .into_iter()
            .map(|it| {
                let image = export::read_image(dir, it).map_err(|e| data_err(dir, e))?;
                let seg = export::segmap_from_png(&read_file(&dir.join(&it.segmap))?).map_err(|e| data_err(dir, e))?;
                Ok((format!("{:05}", it.index), image, Some(seg)))
            })
            .collect()
    }

    /// Every stage in order, writing into the run directory.
    pub fn run_all(&self) -> CliResult<()> {
        let t = Instant::now();
        self.write_manifest()?;
        self.gen_data(&self.train_dataset_config(None), &self.train_dir())?;
        self.gen_data(&self.truth_dataset_config(None), &self.truth_dir())?;
        self.train_gen(&self.train_dir(), &self.generator_path())?;
        self.train_enc(&self.generator_path(), &self.encoder_path())?;
        self.default_stats()?;
        let f = self.fsd(&self.path("stats/generated.json"), &self.path("stats/truth.json"), &self.path("stats/fsd.json"))?;
        info!("FSD generated vs truth: {:.3}", f.fsd);
        let s = self.sensitivity(None, self.cfg.stats.samples, &self.path("stats/sensitivity.json"))?;
        info!("noise floor at {} per split: {:.4}", s.n_per_split, s.fsd_split);
        self.default_invert(self.cfg.inversion.method)?;
        crate::report::write_report(self)?;
        info!("pipeline finished in {:.1?}", t.elapsed());
        Ok(())
    }

    /// Truth and generated statistics plus their histogram.
    pub fn default_stats(&self) -> CliResult<()> {
        let truth = self.stats_of_dataset(&self.truth_dir(), &self.path("stats/truth.json"))?;
        let generated = self.stats_of_generator(&self.generator_path(), self.cfg.stats.samples, &self.path("stats/generated.json"))?;
        self.histogram(&generated, &truth, &self.path("stats/histogram"))
    }

    pub fn default_invert(&self, method: Method) -> CliResult<InversionSummary> {
        let gen = self.load_generator(&self.generator_path())?;
        let stack = self.load_encoder(&self.encoder_path())?;
        let items = self.witness_images(&self.truth_dir(), self.cfg.inversion.count)?;
        let summary = self.invert(&gen, &stack, method, &items, &self.path("inversions"))?;
        info!(
            "withheld-class recall {:?}, retained recall {:?}, pixel correlation {:.4}",
            summary.withheld_recall, summary.retained_recall, summary.pixel_correlation
        );
        Ok(summary)
    }
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}
