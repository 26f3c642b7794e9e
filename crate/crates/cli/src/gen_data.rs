use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use r2d2_core::parallel::default_threads;
use r2d2_core::simulate::dataset::{make_dataset, manifest_hash, DatasetConfig, SpokeSampling, Split};

use crate::provenance::Provenance;
use crate::usage;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory; receives manifest.json and one directory per item.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    #[arg(long, default_value_t = 500)]
    pub train_count: usize,
    #[arg(long, default_value_t = 50)]
    pub val_count: usize,
    #[arg(long, default_value_t = 60)]
    pub test_count: usize,
    /// Draw train/val spoke counts uniformly from a range instead of the acceleration grid.
    #[arg(long, requires = "spokes_max")]
    pub spokes_min: Option<usize>,
    #[arg(long, requires = "spokes_min")]
    pub spokes_max: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub coils_min: usize,
    #[arg(long, default_value_t = 4)]
    pub coils_max: usize,
    /// Percentile of foreground magnitudes that sets the noise level.
    #[arg(long, default_value_t = 6.0)]
    pub percentile: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to available cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Args {
    pub fn config(&self) -> Result<DatasetConfig> {
        let mut c = DatasetConfig::af_grid(self.side, self.train_count, self.val_count, self.test_count, self.seed);
        if let (Some(min), Some(max)) = (self.spokes_min, self.spokes_max) {
            if min == 0 || min > max {
                return Err(usage(format!("invalid spoke range {min}..={max}")));
            }
            c.spokes = SpokeSampling::Range { min, max };
        }
        if self.coils_min == 0 || self.coils_min > self.coils_max {
            return Err(usage(format!("invalid coil range {}..={}", self.coils_min, self.coils_max)));
        }
        c.coils_min = self.coils_min;
        c.coils_max = self.coils_max;
        c.percentile = self.percentile;
        c.validate()?;
        Ok(c)
    }
}

pub fn run(args: Args) -> Result<()> {
    let config = args.config()?;
    let threads = args.threads.unwrap_or_else(default_threads);
    info!("generating {} items at {}x{} into {}", config.total(), config.side, config.side, args.out.display());
    let manifest = make_dataset(&config, &args.out, threads).with_context(|| format!("generating data set in {}", args.out.display()))?;
    let hash = manifest_hash(&args.out)?;
    Provenance::new("gen-data", Some(config.master_seed), &config)?.input("manifest_sha256", hash.clone()).write(&args.out)?;
    info!(
        "wrote {} train, {} val, {} test items",
        manifest.count(Split::Train),
        manifest.count(Split::Val),
        manifest.count(Split::Test)
    );
    println!("{hash}");
    Ok(())
}
