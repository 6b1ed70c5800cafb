use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use ganscope::inversion::Method;
use log::info;

use crate::config::ExperimentConfig;
use crate::pipeline::{data_err, Run};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ganscope", version, about = "Find and visualise classes a generator fails to produce")]
pub struct Cli {
    /// TOML configuration; built-in defaults fill anything it omits. Without
    /// it, the run directory's saved `config.toml` is used if present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Run directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub run: Option<PathBuf>,

    /// Master seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Train,
    Truth,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render scene datasets with images, segmaps and a manifest.
    GenData {
        #[arg(long, value_enum, default_value = "both")]
        which: Which,
        /// Sample count (defaults from the config).
        #[arg(long)]
        n: Option<usize>,
        /// Output directory; only with a single dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the generator on the (class-withheld) training set.
    TrainGen {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the layer-wise, fine-tuned and direct encoders.
    TrainEnc {
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segmentation statistics of a generator or a dataset.
    Stats {
        #[arg(long, conflicts_with = "data")]
        generator: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Generated samples (defaults from the config).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Truth statistics to draw a paired histogram against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Fréchet segmentation distance between two statistics files.
    Fsd {
        a: Option<PathBuf>,
        b: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// FSD between two disjoint truth subsets: the noise floor.
    Sensitivity {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Samples per split (defaults from the config).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invert images through the generator.
    Invert {
        #[arg(long)]
        method: Option<Method>,
        /// PNG images to invert instead of truth images with the withheld class.
        #[arg(long, num_args = 1..)]
        images: Vec<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the static report from a finished run directory.
    Report,
    /// Every stage in order.
    Run,
}

impl Cli {
    pub fn resolve_config(&self) -> CliResult<ExperimentConfig> {
        // A run directory's own config wins over the defaults.
        let saved = self.run.as_ref().map(|r| r.join("config.toml")).filter(|p| p.is_file());
        let mut cfg = match self.config.clone().or(saved) {
            Some(p) => ExperimentConfig::load(&p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(r) = &self.run {
            cfg.out = r.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> CliResult<()> {
    let cfg = cli.resolve_config()?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no command given; see --help".into()));
    };
    let run = Run::new(cfg)?;
    match command {
        Command::GenData { which, n, out } => {
            if out.is_some() && which == Which::Both {
                return Err(CliError::Usage("--out needs --which train or --which truth".into()));
            }
            run.write_manifest()?;
            if which != Which::Truth {
                run.gen_data(&run.train_dataset_config(n), &out.clone().unwrap_or_else(|| run.train_dir()))?;
            }
            if which != Which::Train {
                run.gen_data(&run.truth_dataset_config(n), &out.unwrap_or_else(|| run.truth_dir()))?;
            }
        }
        Command::TrainGen { data, out } => {
            run.write_manifest()?;
            run.train_gen(&data.unwrap_or_else(|| run.train_dir()), &out.unwrap_or_else(|| run.generator_path()))?;
        }
        Command::TrainEnc { generator, out } => {
            run.train_enc(&generator.unwrap_or_else(|| run.generator_path()), &out.unwrap_or_else(|| run.encoder_path()))?;
        }
        Command::Stats { generator, data, n, out, reference } => stats(&run, generator, data, n, out, reference)?,
        Command::Fsd { a, b, out } => {
            let a = a.unwrap_or_else(|| run.path("stats/generated.json"));
            let b = b.unwrap_or_else(|| run.path("stats/truth.json"));
            let rec = run.fsd(&a, &b, &out.unwrap_or_else(|| run.path("stats/fsd.json")))?;
            println!("{}", rec.fsd);
        }
        Command::Sensitivity { data, n, out } => {
            let n = n.unwrap_or(run.cfg.stats.samples);
            let rep = run.sensitivity(data.as_deref(), n, &out.unwrap_or_else(|| run.path("stats/sensitivity.json")))?;
            println!("{}", rep.fsd_split);
        }
        Command::Invert { method, images, count, generator, encoder, out } => {
            let method = method.unwrap_or(run.cfg.inversion.method);
            let gen = run.load_generator(&generator.unwrap_or_else(|| run.generator_path()))?;
            let stack = run.load_encoder(&encoder.unwrap_or_else(|| run.encoder_path()))?;
            let items = if images.is_empty() {
                run.witness_images(&run.truth_dir(), count.unwrap_or(run.cfg.inversion.count))?
            } else {
                images
                    .iter()
                    .map(|p| {
                        let bytes = crate::pipeline::read_file(p)?;
                        let img = ganscope::export::image_from_png(&bytes).map_err(|e| data_err(p, e))?;
                        let stem = p.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
                        Ok((stem, img, None))
                    })
                    .collect::<CliResult<Vec<_>>>()?
            };
            let s = run.invert(&gen, &stack, method, &items, &out.unwrap_or_else(|| run.path("inversions")))?;
            println!("{}", crate::pipeline::to_json(&s).trim_end());
        }
        Command::Report => {
            crate::report::write_report(&run)?;
            info!("report written to {}", run.path("report").display());
        }
        Command::Run => run.run_all()?,
    }
    Ok(())
}

fn stats(
    run: &Run,
    generator: Option<PathBuf>,
    data: Option<PathBuf>,
    n: Option<usize>,
    out: Option<PathBuf>,
    reference: Option<PathBuf>,
) -> CliResult<()> {
    if generator.is_none() && data.is_none() {
        if out.is_some() || reference.is_some() || n.is_some() {
            return Err(CliError::Usage("--out, --n and --reference need --generator or --data".into()));
        }
        return run.default_stats();
    }
    let out = out.ok_or_else(|| CliError::Usage("--out is required with --generator or --data".into()))?;
    let rec = match (generator, data) {
        (Some(g), _) => run.stats_of_generator(&g, n.unwrap_or(run.cfg.stats.samples), &out)?,
        (None, Some(d)) => run.stats_of_dataset(&d, &out)?,
        (None, None) => unreachable!(),
    };
    if let Some(r) = reference {
        let truth = run.load_stats(&r)?;
        run.histogram(&rec, &truth, &out.with_extension(""))?;
    }
    Ok(())
}
