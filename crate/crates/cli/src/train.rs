use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use r2d2_core::nn::{Arch, ArchConfig};
use r2d2_core::parallel::default_threads;
use r2d2_core::series::{train_series, ResidualMode, StoppingRule, TrainConfig};
use r2d2_core::simulate::dataset::manifest_hash;

use crate::provenance::Provenance;
use crate::usage;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Data set root written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Series directory; an existing one is resumed stage by stage.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "unet")]
    pub arch: Arch,
    #[arg(long, default_value_t = 3)]
    pub stages: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Stop once this many consecutive stages fail to improve validation metrics.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, default_value_t = StoppingRule::default().min_delta_psnr)]
    pub min_delta_psnr: f64,
    #[arg(long, default_value_t = StoppingRule::default().min_delta_ssim)]
    pub min_delta_ssim: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "magnitude")]
    pub residual: ResidualMode,
    /// Channels at the first level (architecture default if omitted).
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Args {
    pub fn config(&self) -> Result<TrainConfig> {
        let mut arch = ArchConfig::for_arch(self.arch);
        arch.in_channels = self.residual.in_channels();
        if let Some(b) = self.base_channels {
            arch.base_channels = b;
        }
        if let Some(d) = self.depth {
            arch.depth = d;
        }
        if self.patience == Some(0) {
            return Err(usage("--patience must be at least 1"));
        }
        let mut cfg = TrainConfig::new(arch, self.stages, self.epochs);
        cfg.residual_mode = self.residual;
        cfg.batch_size = self.batch;
        cfg.adam.lr = self.lr;
        cfg.seed = self.seed;
        cfg.threads = self.threads.unwrap_or_else(default_threads);
        cfg.stopping = self.patience.map(|patience| StoppingRule {
            patience,
            min_delta_psnr: self.min_delta_psnr,
            min_delta_ssim: self.min_delta_ssim,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(args: Args) -> Result<()> {
    let cfg = args.config()?;
    let hash = manifest_hash(&args.data).with_context(|| format!("reading data set {}", args.data.display()))?;
    info!("training {} {} stages x {} epochs on {}", cfg.stages, cfg.arch.arch, cfg.epochs, args.data.display());
    let outcome = train_series(&args.data, &cfg, &args.out).with_context(|| format!("training into {}", args.out.display()))?;
    let mut run_cfg = cfg.clone();
    run_cfg.threads = 0;
    Provenance::new("train", Some(cfg.seed), &run_cfg)?.input("manifest_sha256", hash).write(&args.out)?;
    if outcome.resumed_stages > 0 {
        info!("resumed {} completed stage(s)", outcome.resumed_stages);
    }
    if outcome.stopped_early {
        info!("validation stalled; series truncated to {} stage(s)", outcome.series.len());
    }
    println!("stage,psnr,ssim,rdr");
    if let Some(b) = outcome.baseline {
        println!("0,{:.4},{:.5},{:.5}", b.psnr, b.ssim, b.rdr);
    }
    for s in &outcome.series.stages {
        if let Some(v) = s.val {
            println!("{},{:.4},{:.5},{:.5}", s.stage, v.psnr, v.ssim, v.rdr);
        }
    }
    Ok(())
}
