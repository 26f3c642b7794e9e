use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use super::{
    apply_stage, iterate_dir, normalization_factor, stage_checkpoint_name, stage_input, stage_state, stage_target,
    stopping_check, ModuleSeries, Residual, ResidualMode, SeriesProvenance, StopDecision, StoppingRule,
};
use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};
use crate::metrics;
use crate::nn::{build, checkpoint, l1_loss, Adam, AdamConfig, ArchConfig, Network, Tensor};
use crate::parallel::par_map;
use crate::rawio;
use crate::simulate::dataset::{manifest_hash, DatasetManifest, Split};
use crate::simulate::InverseProblem;

pub const TRAIN_LOG: &str = "train_log.json";
pub const VALIDATION_CSV: &str = "validation.csv";
const STAGE_DONE: &str = "done.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub residual_mode: ResidualMode,
    pub stages: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// `None` trains exactly `stages` stages.
    pub stopping: Option<StoppingRule>,
    pub threads: usize,
}

impl TrainConfig {
    pub fn new(arch: ArchConfig, stages: usize, epochs: usize) -> Self {
        Self {
            arch,
            residual_mode: ResidualMode::Magnitude,
            stages,
            epochs,
            batch_size: 4,
            adam: AdamConfig::default(),
            seed: 0,
            stopping: None,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("stages and batch size must be positive".into()));
        }
        if self.arch.in_channels != self.residual_mode.in_channels() || self.arch.out_channels != 2 {
            return Err(Error::InvalidArgument(format!(
                "{:?} residuals need {} input channels and 2 outputs",
                self.residual_mode,
                self.residual_mode.in_channels()
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        self.arch.validate()
    }
}

/// Validation means over the val split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub rdr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub epochs: usize,
    /// Mean per-item L1 loss of the freshly initialized module.
    pub initial_loss: f64,
    /// Mean per-item L1 loss over the last epoch.
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub val: Option<ValMetrics>,
    pub train_seconds: f64,
    pub update_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub series: ModuleSeries,
    pub baseline: Option<ValMetrics>,
    pub stopped_early: bool,
    /// Stages loaded from an earlier run instead of trained.
    pub resumed_stages: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainLog {
    dataset_hash: String,
    config: TrainConfig,
    baseline: Option<ValMetrics>,
    stages: Vec<StageSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StageDone {
    stage: usize,
    dataset_hash: String,
    items: usize,
}

struct Item {
    problem: InverseProblem,
    split: Split,
}

#[derive(Clone)]
struct ItemState {
    x: ComplexImage,
    r: Residual,
    rdr: f64,
}

/// `score_xb` scores the back-projections instead of the estimates.
fn val_metrics(items: &[Item], states: &[ItemState], score_xb: bool) -> Result<Option<ValMetrics>> {
    let (mut p, mut s, mut r, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (it, st) in items.iter().zip(states) {
        if it.split != Split::Val {
            continue;
        }
        let est = if score_xb { &it.problem.x_b } else { &st.x };
        p += metrics::psnr(it.problem.gt(), est)?;
        s += metrics::ssim_global(it.problem.gt(), est)?;
        r += st.rdr;
        n += 1;
    }
    Ok((n > 0).then(|| ValMetrics {
        psnr: p / n as f64,
        ssim: s / n as f64,
        rdr: r / n as f64,
    }))
}

fn save_iterates(dir: &Path, items: &[Item], states: &[ItemState], stage: usize, hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (it, st) in items.iter().zip(states) {
        let n = st.x.side();
        let id = &it.problem.id;
        let meta = serde_json::json!({ "id": id, "stage": stage, "rdr": st.rdr });
        rawio::write_c128(&dir.join(format!("{id}.x.c128")), st.x.data(), &[n, n], meta.clone())?;
        match &st.r {
            Residual::Complex(r) => rawio::write_c128(&dir.join(format!("{id}.r.c128")), r.data(), &[n, n], meta)?,
            Residual::Magnitude(r) => rawio::write_f64(&dir.join(format!("{id}.r.f64")), r.data(), &[n, n], meta)?,
        }
    }
    rawio::write_json(
        &dir.join(STAGE_DONE),
        &StageDone {
            stage,
            dataset_hash: hash.to_string(),
            items: items.len(),
        },
    )
}

fn load_iterates(dir: &Path, items: &[Item], mode: ResidualMode) -> Result<Vec<ItemState>> {
    items
        .iter()
        .map(|it| {
            let id = &it.problem.id;
            let n = it.problem.side();
            let (x, sc) = rawio::read_c128(&dir.join(format!("{id}.x.c128")))?;
            let rdr = sc.meta["rdr"].as_f64().ok_or_else(|| Error::format(dir, format!("{id}: missing rdr")))?;
            let r = match mode {
                ResidualMode::Complex => {
                    Residual::Complex(ComplexImage::from_vec(n, rawio::read_c128(&dir.join(format!("{id}.r.c128")))?.0)?)
                }
                ResidualMode::Magnitude => {
                    Residual::Magnitude(RealImage::from_vec(n, rawio::read_f64(&dir.join(format!("{id}.r.f64")))?.0)?)
                }
            };
            Ok(ItemState {
                x: ComplexImage::from_vec(n, x)?,
                r,
                rdr,
            })
        })
        .collect()
}

fn stage_complete(out_dir: &Path, stage: usize, hash: &str, n_items: usize) -> bool {
    let done: Result<StageDone> = rawio::read_json(&iterate_dir(out_dir, stage).join(STAGE_DONE));
    matches!(done, Ok(d) if d.stage == stage && d.dataset_hash == hash && d.items == n_items)
        && out_dir.join(stage_checkpoint_name(stage)).exists()
}

fn write_validation_csv(path: &Path, baseline: Option<ValMetrics>, stages: &[StageSummary]) -> Result<()> {
    let mut s = String::from("stage,psnr,ssim,rdr\n");
    let mut row = |k: usize, v: Option<ValMetrics>| {
        if let Some(v) = v {
            s.push_str(&format!("{k},{},{},{}\n", v.psnr, v.ssim, v.rdr));
        }
    };
    row(0, baseline);
    for st in stages {
        row(st.stage, st.val);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Mean per-item L1 loss of `net` on `(inputs, targets)`.
fn mean_loss(net: &Network<f32>, inputs: &[Tensor<f32>], targets: &[Tensor<f32>]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        total += l1_loss(&net.forward(x.clone())?, y)?.0;
    }
    Ok(total / inputs.len() as f64)
}

struct StageRun {
    net: Network<f32>,
    initial_loss: f64,
    epoch_losses: Vec<f64>,
}

fn train_stage(
    mut net: Network<f32>,
    inputs: &[Tensor<f32>],
    targets: &[Tensor<f32>],
    cfg: &TrainConfig,
    stage: usize,
    out_dir: &Path,
) -> Result<StageRun> {
    let initial_loss = mean_loss(&net, inputs, targets)?;
    let mut opt = Adam::new(cfg.adam, &net.params);
    let mut grads = net.params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stage as u64));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut last_good = net.params.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let inv_b = 1.0 / batch.len() as f32;
            for &k in batch {
                let acts = net.forward_with_activations(inputs[k].clone())?;
                let (loss, mut g) = l1_loss(acts.output(), &targets[k])?;
                total += loss;
                g.data.iter_mut().for_each(|v| *v *= inv_b);
                net.backward(&acts, g, &mut grads)?;
            }
            let step = if total.is_finite() {
                opt.step(&mut net.params, &grads)
            } else {
                Err(Error::NonFinite(format!("training loss at stage {stage}, epoch {epoch}")))
            };
            if let Err(e) = step.and_then(|_| match net.params.first_non_finite() {
                Some(name) => Err(Error::NonFinite(format!("parameter `{name}` at stage {stage}, epoch {epoch}"))),
                None => Ok(()),
            }) {
                net.params = last_good;
                let p = out_dir.join(format!("stage{stage:02}.last_good.ckpt"));
                checkpoint::save(&p, &net, serde_json::json!({ "stage": stage, "completed_epochs": epoch }))?;
                log::error!("stage {stage} diverged at epoch {epoch}; last good parameters in {}", p.display());
                return Err(e);
            }
        }
        let mean = total / inputs.len() as f64;
        log::info!("stage {stage} epoch {}/{}: loss {mean:.6}", epoch + 1, cfg.epochs);
        epoch_losses.push(mean);
        last_good = net.params.clone();
    }
    Ok(StageRun {
        net,
        initial_loss,
        epoch_losses,
    })
}

/// Train up to `cfg.stages` modules sequentially on the train split of the
/// data set at `dataset_root`, writing checkpoints, per-stage iterates and
/// logs under `out_dir`.
///
/// Stages whose checkpoint and iterates already exist in `out_dir` (from a
/// run on the same data set) are loaded instead of retrained.
pub fn train_series(dataset_root: &Path, cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let manifest = DatasetManifest::load(dataset_root)?;
    let hash = manifest_hash(dataset_root)?;
    if manifest.count(Split::Train) == 0 {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let side = manifest.config.side;
    if side % cfg.arch.side_multiple() != 0 {
        return Err(Error::InvalidArgument(format!(
            "image side {side} is not divisible by 2^depth = {}",
            cfg.arch.side_multiple()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let wanted: Vec<_> = manifest.items.iter().filter(|i| i.split != Split::Test).collect();
    let items: Vec<Item> = par_map(&wanted, cfg.threads, |_, it| {
        Ok::<_, Error>(Item {
            problem: manifest.load_item(dataset_root, it)?,
            split: it.split,
        })
    })?;
    let train_idx: Vec<usize> = (0..items.len()).filter(|&k| items[k].split == Split::Train).collect();

    let mut states: Vec<ItemState> = items
        .iter()
        .map(|it| ItemState {
            x: ComplexImage::zeros(side).expect("valid side"),
            r: Residual::Complex(it.problem.x_b.clone()),
            rdr: 1.0,
        })
        .collect();
    let baseline = val_metrics(&items, &states, true)?;

    let provenance = SeriesProvenance {
        dataset_hash: hash.clone(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).map_err(|e| Error::json(out_dir, e))?,
    };
    let prior: Option<TrainLog> = rawio::read_json(&out_dir.join(TRAIN_LOG)).ok();
    let mut summaries: Vec<StageSummary> = Vec::new();
    let mut modules: Vec<Network<f32>> = Vec::new();

    let mut resumed = 0;
    while resumed < cfg.stages && stage_complete(out_dir, resumed + 1, &hash, items.len()) {
        let stage = resumed + 1;
        let (net, _) = checkpoint::load::<f32>(&out_dir.join(stage_checkpoint_name(stage)))?;
        if net.config != cfg.arch {
            return Err(Error::InvalidArgument(format!(
                "existing stage {stage} checkpoint in {} has a different architecture",
                out_dir.display()
            )));
        }
        modules.push(net);
        let summary = prior
            .as_ref()
            .and_then(|l| l.stages.iter().find(|s| s.stage == stage).cloned())
            .ok_or_else(|| Error::format(out_dir.join(TRAIN_LOG), format!("no summary for completed stage {stage}")))?;
        summaries.push(summary);
        resumed = stage;
        log::info!("stage {stage}: resumed from {}", out_dir.display());
    }
    if resumed > 0 {
        states = load_iterates(&iterate_dir(out_dir, resumed), &items, cfg.residual_mode)?;
    }

    let mut stopped_early = false;
    let write_logs = |summaries: &[StageSummary], modules: &[Network<f32>]| -> Result<()> {
        let log = TrainLog {
            dataset_hash: hash.clone(),
            config: cfg.clone(),
            baseline,
            stages: summaries.to_vec(),
        };
        rawio::write_json(&out_dir.join(TRAIN_LOG), &log)?;
        write_validation_csv(&out_dir.join(VALIDATION_CSV), baseline, summaries)?;
        if !modules.is_empty() {
            let mut series = ModuleSeries::new(cfg.arch.clone(), cfg.residual_mode, modules.to_vec(), provenance.clone())?;
            series.stages = summaries.to_vec();
            series.save(out_dir)?;
        }
        Ok(())
    };

    let history = |s: &[StageSummary]| -> Vec<(f64, f64)> { s.iter().filter_map(|x| x.val.map(|v| (v.psnr, v.ssim))).collect() };
    if let Some(rule) = &cfg.stopping {
        if resumed > 0 && stopping_check(&history(&summaries), rule) == StopDecision::Stop {
            stopped_early = resumed < cfg.stages;
        }
    }

    let first_new = resumed + 1;
    for stage in first_new..=cfg.stages {
        if stopped_early {
            break;
        }
        let t0 = Instant::now();
        let mut inputs = Vec::with_capacity(train_idx.len());
        let mut targets = Vec::with_capacity(train_idx.len());
        for &k in &train_idx {
            let (p, st) = (&items[k].problem, &states[k]);
            let alpha = normalization_factor(stage, &p.x_b, &st.x)?;
            inputs.push(stage_input(cfg.residual_mode, stage, &p.x_b, &st.x, &st.r, alpha)?);
            targets.push(stage_target(p.gt(), &st.x, alpha)?);
        }
        let start = match modules.last() {
            None => build::<f32>(&cfg.arch, cfg.seed)?,
            Some(prev) => {
                let mut n = prev.clone();
                n.zero_final_layer();
                n
            }
        };
        let run = train_stage(start, &inputs, &targets, cfg, stage, out_dir)?;
        drop((inputs, targets));
        let train_seconds = t0.elapsed().as_secs_f64();
        checkpoint::save(&out_dir.join(stage_checkpoint_name(stage)), &run.net, serde_json::json!({ "stage": stage }))?;

        let t1 = Instant::now();
        let net = &run.net;
        let new_states = par_map(&items, cfg.threads, |k, it| {
            let st = &states[k];
            let p = &it.problem;
            let (update, _) = apply_stage(net, cfg.residual_mode, stage, &p.x_b, &st.x, &st.r)
                .map_err(|e| Error::NonFinite(format!("item {}: {e}", p.id)))?;
            let s = stage_state(cfg.residual_mode, &p.x_b, &p.model, st.x.add(&update)?)?;
            Ok::<_, Error>(ItemState {
                x: s.estimate,
                r: s.residual,
                rdr: s.rdr,
            })
        })?;
        states = new_states;
        save_iterates(&iterate_dir(out_dir, stage), &items, &states, stage, &hash)?;
        let val = val_metrics(&items, &states, false)?;
        let update_seconds = t1.elapsed().as_secs_f64();
        if let Some(v) = val {
            log::info!("stage {stage}: val PSNR {:.3} dB, SSIM {:.4}, RDR {:.4}", v.psnr, v.ssim, v.rdr);
        }
        summaries.push(StageSummary {
            stage,
            epochs: cfg.epochs,
            initial_loss: run.initial_loss,
            final_loss: run.epoch_losses.last().copied().unwrap_or(run.initial_loss),
            epoch_losses: run.epoch_losses,
            val,
            train_seconds,
            update_seconds,
        });
        modules.push(run.net);
        write_logs(&summaries, &modules)?;
        if let Some(rule) = &cfg.stopping {
            if stage < cfg.stages && stopping_check(&history(&summaries), rule) == StopDecision::Stop {
                log::info!("stage {stage}: validation metrics stalled, stopping");
                stopped_early = true;
            }
        }
    }
    if resumed > 0 && modules.len() == resumed {
        write_logs(&summaries, &modules)?;
    }
    let mut series = ModuleSeries::new(cfg.arch.clone(), cfg.residual_mode, modules, provenance)?;
    series.stages = summaries;
    Ok(TrainOutcome {
        series,
        baseline,
        stopped_early,
        resumed_stages: resumed,
    })
}
