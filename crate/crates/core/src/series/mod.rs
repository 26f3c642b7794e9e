//! The residual-to-residual series: each module maps the current estimate and
//! the back-projected data residual to an image update, and the
//! reconstruction is the running sum of the updates.
//!
//! Every module sees inputs divided by `alpha` (mean modulus of the previous
//! estimate, or of `x_b` at the first stage) and its output is multiplied
//! back by `alpha`.

mod stopping;
mod train;

pub use stopping::{stopping_check, StopDecision, StoppingRule};
pub use train::{train_series, StageSummary, TrainConfig, TrainOutcome, ValMetrics};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::coil::MeasurementModel;
use crate::error::{ensure_len, Error, Result};
use crate::image::{ComplexImage, RealImage};
use crate::metrics;
use crate::nn::{checkpoint, ArchConfig, Network, Tensor};
use crate::rawio;

pub const SERIES_MANIFEST: &str = "series.json";
pub const SERIES_FORMAT_VERSION: u32 = 1;

/// How the data residual is fed to stages after the first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// 3 channels: `[Re x, Im x, |x_b| - |kappa P x|]`; the first stage sees `[0, Re x_b, Im x_b]`.
    #[default]
    Magnitude,
    /// 4 channels: `[Re x, Im x, Re r, Im r]` with the complex residual at every stage.
    Complex,
}

impl ResidualMode {
    pub fn in_channels(self) -> usize {
        match self {
            ResidualMode::Magnitude => 3,
            ResidualMode::Complex => 4,
        }
    }
}

impl std::str::FromStr for ResidualMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(Self::Magnitude),
            "complex" => Ok(Self::Complex),
            _ => Err(Error::InvalidArgument(format!("unknown residual mode `{s}`"))),
        }
    }
}

/// A back-projected data residual.
#[derive(Clone, Debug, PartialEq)]
pub enum Residual {
    Complex(ComplexImage),
    Magnitude(RealImage),
}

impl Residual {
    pub fn norm(&self) -> f64 {
        match self {
            Residual::Complex(r) => r.norm(),
            Residual::Magnitude(r) => r.norm(),
        }
    }

    pub fn side(&self) -> usize {
        match self {
            Residual::Complex(r) => r.side(),
            Residual::Magnitude(r) => r.side(),
        }
    }
}

fn check_sides(x_b: &ComplexImage, model: &MeasurementModel, x: &ComplexImage) -> Result<()> {
    ensure_len("residual x_b side", model.side(), x_b.side())?;
    ensure_len("residual estimate side", model.side(), x.side())
}

fn kappa_p(model: &MeasurementModel, x: &ComplexImage) -> Result<ComplexImage> {
    Ok(model.normal_apply(x)?.scaled(model.kappa()))
}

/// `x_b - kappa P x`.
pub fn residual(x_b: &ComplexImage, model: &MeasurementModel, x: &ComplexImage) -> Result<ComplexImage> {
    check_sides(x_b, model, x)?;
    x_b.sub(&kappa_p(model, x)?)
}

/// `|x_b| - |kappa P x|` pixelwise.
pub fn magnitude_residual(x_b: &ComplexImage, model: &MeasurementModel, x: &ComplexImage) -> Result<RealImage> {
    check_sides(x_b, model, x)?;
    magnitude_difference(x_b, &kappa_p(model, x)?)
}

fn magnitude_difference(x_b: &ComplexImage, kpx: &ComplexImage) -> Result<RealImage> {
    RealImage::from_vec(x_b.side(), x_b.data().iter().zip(kpx.data()).map(|(a, b)| a.norm() - b.norm()).collect())
}

/// Normalization factor for stage `stage` (1-based).
///
/// Stage 1 uses the mean modulus of `x_b`; later stages use the previous
/// estimate's, falling back to `x_b`'s when that is zero.
pub fn normalization_factor(stage: usize, x_b: &ComplexImage, x_prev: &ComplexImage) -> Result<f64> {
    let from_xb = x_b.mean_abs();
    let alpha = if stage <= 1 { from_xb } else { x_prev.mean_abs() };
    let alpha = if alpha > 0.0 && alpha.is_finite() { alpha } else { from_xb };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Degenerate("normalization factor is zero (x_b vanishes)".into()));
    }
    Ok(alpha)
}

fn push_scaled(data: &mut Vec<f32>, values: impl Iterator<Item = f64>, inv: f64) {
    data.extend(values.map(|v| (v * inv) as f32));
}

/// Network input for stage `stage` (1-based), already divided by `alpha`.
pub fn stage_input(
    mode: ResidualMode,
    stage: usize,
    x_b: &ComplexImage,
    x_prev: &ComplexImage,
    r_prev: &Residual,
    alpha: f64,
) -> Result<Tensor<f32>> {
    let n = x_b.side();
    ensure_len("stage input estimate", n, x_prev.side())?;
    ensure_len("stage input residual", n, r_prev.side())?;
    let inv = 1.0 / alpha;
    let mut data = Vec::with_capacity(mode.in_channels() * n * n);
    match (mode, r_prev) {
        (ResidualMode::Magnitude, _) if stage <= 1 => {
            data.resize(n * n, 0.0);
            push_scaled(&mut data, x_b.data().iter().map(|z| z.re), inv);
            push_scaled(&mut data, x_b.data().iter().map(|z| z.im), inv);
        }
        (ResidualMode::Magnitude, Residual::Magnitude(r)) => {
            push_scaled(&mut data, x_prev.data().iter().map(|z| z.re), inv);
            push_scaled(&mut data, x_prev.data().iter().map(|z| z.im), inv);
            push_scaled(&mut data, r.data().iter().copied(), inv);
        }
        (ResidualMode::Complex, Residual::Complex(r)) => {
            push_scaled(&mut data, x_prev.data().iter().map(|z| z.re), inv);
            push_scaled(&mut data, x_prev.data().iter().map(|z| z.im), inv);
            push_scaled(&mut data, r.data().iter().map(|z| z.re), inv);
            push_scaled(&mut data, r.data().iter().map(|z| z.im), inv);
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "stage {stage} residual kind does not match the {mode:?} channel layout"
            )))
        }
    }
    Tensor::from_vec(mode.in_channels(), n, n, data)
}

/// Training target `(x_star - x_prev) / alpha` as `[Re, Im]`.
pub fn stage_target(gt: &ComplexImage, x_prev: &ComplexImage, alpha: f64) -> Result<Tensor<f32>> {
    let n = gt.side();
    let d = gt.sub(x_prev)?;
    let inv = 1.0 / alpha;
    let mut data = Vec::with_capacity(2 * n * n);
    push_scaled(&mut data, d.data().iter().map(|z| z.re), inv);
    push_scaled(&mut data, d.data().iter().map(|z| z.im), inv);
    Tensor::from_vec(2, n, n, data)
}

/// `alpha * (out_0 + i out_1)` as an image update.
pub fn denormalize(out: &Tensor<f32>, alpha: f64) -> Result<ComplexImage> {
    if out.c != 2 || out.h != out.w {
        return Err(Error::InvalidArgument(format!("module output must be 2 x n x n, got {} x {} x {}", out.c, out.h, out.w)));
    }
    let hw = out.plane();
    let data = (0..hw)
        .map(|k| Complex64::new(out.data[k] as f64 * alpha, out.data[hw + k] as f64 * alpha))
        .collect();
    ComplexImage::from_vec(out.h, data)
}

/// One stage's state after its update: `x^(i)`, its complex residual, and
/// the residual fed to the next stage.
#[derive(Clone, Debug)]
pub struct StageState {
    pub estimate: ComplexImage,
    pub residual: Residual,
    pub rdr: f64,
}

/// Residual of `x` in `mode`, plus the RDR of the complex data residual.
pub fn stage_state(mode: ResidualMode, x_b: &ComplexImage, model: &MeasurementModel, x: ComplexImage) -> Result<StageState> {
    check_sides(x_b, model, &x)?;
    let kpx = kappa_p(model, &x)?;
    let complex = x_b.sub(&kpx)?;
    let rdr = metrics::rdr(x_b, &complex)?;
    let residual = match mode {
        ResidualMode::Magnitude => Residual::Magnitude(magnitude_difference(x_b, &kpx)?),
        ResidualMode::Complex => Residual::Complex(complex),
    };
    Ok(StageState {
        estimate: x,
        residual,
        rdr,
    })
}

/// Apply module `net` as stage `stage`: returns the denormalized update and `alpha`.
pub fn apply_stage(
    net: &Network<f32>,
    mode: ResidualMode,
    stage: usize,
    x_b: &ComplexImage,
    x_prev: &ComplexImage,
    r_prev: &Residual,
) -> Result<(ComplexImage, f64)> {
    let alpha = normalization_factor(stage, x_b, x_prev)?;
    let input = stage_input(mode, stage, x_b, x_prev, r_prev, alpha)?;
    let out = net.forward(input)?;
    let update = denormalize(&out, alpha)?;
    if !update.is_finite() {
        return Err(Error::NonFinite(format!("update of iteration {stage}")));
    }
    Ok((update, alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesProvenance {
    pub dataset_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SeriesManifest {
    format_version: u32,
    arch: ArchConfig,
    residual_mode: ResidualMode,
    normalization: String,
    n_stages: usize,
    checkpoints: Vec<String>,
    provenance: SeriesProvenance,
    stages: Vec<StageSummary>,
}

/// Trained modules in application order, all of one architecture.
#[derive(Clone, Debug)]
pub struct ModuleSeries {
    pub arch: ArchConfig,
    pub mode: ResidualMode,
    pub modules: Vec<Network<f32>>,
    pub provenance: SeriesProvenance,
    pub stages: Vec<StageSummary>,
}

pub fn stage_checkpoint_name(stage: usize) -> String {
    format!("stage{stage:02}.ckpt")
}

impl ModuleSeries {
    pub fn new(arch: ArchConfig, mode: ResidualMode, modules: Vec<Network<f32>>, provenance: SeriesProvenance) -> Result<Self> {
        let s = Self {
            arch,
            mode,
            modules,
            provenance,
            stages: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.modules.is_empty() {
            return Err(Error::InvalidArgument("a series needs at least one module".into()));
        }
        if self.arch.in_channels != self.mode.in_channels() || self.arch.out_channels != 2 {
            return Err(Error::InvalidArgument(format!(
                "architecture has {} -> {} channels, residual mode needs {} -> 2",
                self.arch.in_channels,
                self.arch.out_channels,
                self.mode.in_channels()
            )));
        }
        if let Some(i) = self.modules.iter().position(|m| m.config != self.arch) {
            return Err(Error::InvalidArgument(format!("module {} has a different architecture", i + 1)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    /// Truncated copy with the first `n` modules.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let s = Self {
            modules: self.modules[..n.min(self.len())].to_vec(),
            stages: self.stages.iter().filter(|s| s.stage <= n).cloned().collect(),
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = Vec::new();
        for (i, m) in self.modules.iter().enumerate() {
            let name = stage_checkpoint_name(i + 1);
            checkpoint::save(&dir.join(&name), m, serde_json::json!({ "stage": i + 1 }))?;
            names.push(name);
        }
        let manifest = SeriesManifest {
            format_version: SERIES_FORMAT_VERSION,
            arch: self.arch.clone(),
            residual_mode: self.mode,
            normalization: "mean_modulus".into(),
            n_stages: self.len(),
            checkpoints: names,
            provenance: self.provenance.clone(),
            stages: self.stages.clone(),
        };
        rawio::write_json(&dir.join(SERIES_MANIFEST), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SERIES_MANIFEST);
        let m: SeriesManifest = rawio::read_json(&path)?;
        if m.format_version != SERIES_FORMAT_VERSION {
            return Err(Error::format(&path, format!("unsupported series version {}", m.format_version)));
        }
        if m.checkpoints.len() != m.n_stages {
            return Err(Error::format(&path, "checkpoint list length differs from n_stages"));
        }
        let modules = m
            .checkpoints
            .iter()
            .map(|c| checkpoint::load::<f32>(&dir.join(c)).map(|(n, _)| n))
            .collect::<Result<Vec<_>>>()?;
        let s = Self {
            arch: m.arch,
            mode: m.residual_mode,
            modules,
            provenance: m.provenance,
            stages: m.stages,
        };
        s.validate().map_err(|e| Error::format(&path, e.to_string()))?;
        Ok(s)
    }
}

/// One row of an inference trace. Row 0 describes the back-projection `x_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub rdr: f64,
    pub alpha: Option<f64>,
}

pub const TRACE_HEADER: &str = "iteration,psnr,ssim,rdr,alpha";

#[derive(Clone, Debug)]
pub struct Inference {
    /// `x^(0) = 0`, then `x^(1) .. x^(I)`.
    pub estimates: Vec<ComplexImage>,
    /// `r^(0) = x_b`, then the residual fed to each following stage.
    pub residuals: Vec<Residual>,
    pub updates: Vec<ComplexImage>,
    pub trace: Vec<TraceRow>,
    /// Wall time inside module forward passes.
    pub network_seconds: f64,
    /// Wall time recomputing data residuals.
    pub residual_seconds: f64,
}

impl Inference {
    pub fn final_estimate(&self) -> &ComplexImage {
        self.estimates.last().expect("x^(0) always present")
    }

    /// Largest pixel deviation of `x^(I)` from the sum of updates, relative to `||x^(I)||_inf`.
    pub fn telescoping_error(&self) -> Result<f64> {
        let x = self.final_estimate();
        let mut sum = ComplexImage::zeros(x.side())?;
        for u in &self.updates {
            sum.add_assign(u)?;
        }
        let dev = x.sub(&sum)?.max_abs();
        let scale = x.max_abs();
        Ok(if scale > 0.0 { dev / scale } else { dev })
    }

    /// Trace as CSV, after asserting the telescoping identity.
    pub fn trace_csv(&self) -> Result<String> {
        let err = self.telescoping_error()?;
        if err > TELESCOPING_TOL {
            return Err(Error::Numerical(format!("telescoping identity violated: {err:e}")));
        }
        Ok(trace_to_csv(&self.trace))
    }
}

pub const TELESCOPING_TOL: f64 = 1e-12;

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.iteration, opt(r.psnr), opt(r.ssim), r.rdr, opt(r.alpha)));
    }
    s
}

fn quality(gt: Option<&ComplexImage>, x: &ComplexImage) -> Result<(Option<f64>, Option<f64>)> {
    match gt {
        Some(g) => Ok((Some(metrics::psnr(g, x)?), Some(metrics::ssim_global(g, x)?))),
        None => Ok((None, None)),
    }
}

/// Run the first `max_iters` modules of `series` on one problem.
///
/// `gt`, when given, adds PSNR and SSIM to the trace. Row 0 of the trace
/// scores `x_b` itself.
pub fn r2d2_infer(
    series: &ModuleSeries,
    x_b: &ComplexImage,
    model: &MeasurementModel,
    max_iters: usize,
    gt: Option<&ComplexImage>,
) -> Result<Inference> {
    if max_iters > series.len() {
        return Err(Error::InvalidArgument(format!(
            "max_iters {max_iters} exceeds series length {}",
            series.len()
        )));
    }
    ensure_len("problem side", model.side(), x_b.side())?;
    let n = x_b.side();
    let m = series.arch.side_multiple();
    if !n.is_multiple_of(m) {
        return Err(Error::InvalidArgument(format!("image side {n} is not a multiple of {m} required by the series")));
    }
    let (psnr, ssim) = quality(gt, x_b)?;
    let mut out = Inference {
        estimates: vec![ComplexImage::zeros(n)?],
        residuals: vec![Residual::Complex(x_b.clone())],
        updates: Vec::new(),
        trace: vec![TraceRow {
            iteration: 0,
            psnr,
            ssim,
            rdr: 1.0,
            alpha: None,
        }],
        network_seconds: 0.0,
        residual_seconds: 0.0,
    };
    for (k, net) in series.modules[..max_iters].iter().enumerate() {
        let stage = k + 1;
        let x_prev = out.estimates.last().expect("nonempty");
        let r_prev = out.residuals.last().expect("nonempty");
        let t = Instant::now();
        let (update, alpha) = apply_stage(net, series.mode, stage, x_b, x_prev, r_prev)?;
        out.network_seconds += t.elapsed().as_secs_f64();
        let x = x_prev.add(&update)?;
        let t = Instant::now();
        let state = stage_state(series.mode, x_b, model, x)?;
        out.residual_seconds += t.elapsed().as_secs_f64();
        let (psnr, ssim) = quality(gt, &state.estimate)?;
        out.trace.push(TraceRow {
            iteration: stage,
            psnr,
            ssim,
            rdr: state.rdr,
            alpha: Some(alpha),
        });
        out.updates.push(update);
        out.estimates.push(state.estimate);
        out.residuals.push(state.residual);
    }
    let err = out.telescoping_error()?;
    if err > TELESCOPING_TOL {
        return Err(Error::Numerical(format!("telescoping identity violated: {err:e}")));
    }
    Ok(out)
}

/// Training-time iterates and residuals saved after `stage`.
pub fn iterate_dir(root: &Path, stage: usize) -> PathBuf {
    root.join("iterates").join(format!("stage{stage:02}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::build;
    use crate::simulate::tests::small_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap()
    }

    fn live_series(mode: ResidualMode, stages: usize, seed: u64) -> ModuleSeries {
        let arch = ArchConfig {
            base_channels: 4,
            depth: 2,
            in_channels: mode.in_channels(),
            ..ArchConfig::unet()
        };
        let modules = (0..stages)
            .map(|s| {
                let mut net = build::<f32>(&arch, seed + s as u64).unwrap();
                let fw = net.final_weight();
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + s as u64);
                net.params.get_mut(fw).iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
                net
            })
            .collect();
        ModuleSeries::new(
            arch,
            mode,
            modules,
            SeriesProvenance {
                dataset_hash: String::new(),
                seed,
                config: serde_json::Value::Null,
            },
        )
        .unwrap()
    }

    #[test]
    fn residual_at_zero_is_back_projection() {
        let model = small_model(16, 6, 2, 1);
        let x_b = random_image(16, 2);
        let zero = ComplexImage::zeros(16).unwrap();
        assert_eq!(residual(&x_b, &model, &zero).unwrap(), x_b);
        assert_eq!(magnitude_residual(&x_b, &model, &zero).unwrap(), x_b.magnitude());
    }

    #[test]
    fn residual_is_affine() {
        let model = small_model(16, 6, 2, 3);
        let (x_b, x1, x2) = (random_image(16, 4), random_image(16, 5), random_image(16, 6));
        let lhs = residual(&x_b, &model, &x1.add(&x2).unwrap()).unwrap();
        let kp2 = model.normal_apply(&x2).unwrap().scaled(model.kappa());
        let rhs = residual(&x_b, &model, &x1).unwrap().sub(&kp2).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * lhs.max_abs());
    }

    #[test]
    fn magnitude_residual_bounds_and_phase_sensitivity() {
        let model = small_model(16, 6, 2, 7);
        let (x_b, x) = (random_image(16, 8), random_image(16, 9));
        let m = magnitude_residual(&x_b, &model, &x).unwrap();
        let kpx = model.normal_apply(&x).unwrap().scaled(model.kappa());
        assert!(m.max() <= x_b.max_abs() + 1e-15);
        assert!(m.min() >= -kpx.max_abs() - 1e-15);
        let c = residual(&x_b, &model, &x).unwrap().magnitude();
        let differ = m.data().iter().zip(c.data()).filter(|(a, b)| (*a - *b).abs() > 1e-6).count();
        assert!(differ > 0);
    }

    #[test]
    fn zero_modules_keep_zero_estimate() {
        let model = small_model(16, 6, 2, 11);
        let x_b = random_image(16, 12);
        let mut s = live_series(ResidualMode::Magnitude, 3, 1);
        s.modules.iter_mut().for_each(|m| m.zero_final_layer());
        let inf = r2d2_infer(&s, &x_b, &model, 3, None).unwrap();
        assert!(inf.estimates.iter().all(|x| x.max_abs() == 0.0));
        assert!(inf.trace.iter().all(|r| r.rdr == 1.0));
        assert_eq!(inf.trace.len(), 4);
    }

    #[test]
    fn telescoping_identity_holds() {
        let model = small_model(16, 6, 2, 13);
        let x_b = random_image(16, 14);
        for mode in [ResidualMode::Magnitude, ResidualMode::Complex] {
            let s = live_series(mode, 3, 2);
            let inf = r2d2_infer(&s, &x_b, &model, 3, Some(&x_b)).unwrap();
            assert!(inf.final_estimate().max_abs() > 0.0);
            assert!(inf.telescoping_error().unwrap() <= 1e-12);
            let csv = inf.trace_csv().unwrap();
            assert!(csv.starts_with("iteration,psnr,ssim,rdr,alpha\n"));
            assert_eq!(csv.lines().count(), 5);
        }
    }

    #[test]
    fn wrapped_module_is_scale_equivariant() {
        let model = small_model(16, 6, 2, 15);
        let s = live_series(ResidualMode::Magnitude, 2, 3);
        let x_b = random_image(16, 16);
        let x = random_image(16, 17);
        let st = stage_state(ResidualMode::Magnitude, &x_b, &model, x.clone()).unwrap();
        let (u, a) = apply_stage(&s.modules[1], s.mode, 2, &x_b, &x, &st.residual).unwrap();
        // Powers of two keep the float32 network input bit-identical.
        let c = 4.0;
        let (xb2, x2) = (x_b.scaled(c), x.scaled(c));
        let st2 = stage_state(ResidualMode::Magnitude, &xb2, &model, x2.clone()).unwrap();
        let (u2, a2) = apply_stage(&s.modules[1], s.mode, 2, &xb2, &x2, &st2.residual).unwrap();
        assert!((a2 / a - c).abs() < 1e-12);
        assert!(u2.sub(&u.scaled(c)).unwrap().max_abs() <= 1e-6 * u2.max_abs());
    }

    #[test]
    fn inference_is_deterministic_and_bounded_by_series_length() {
        let model = small_model(16, 6, 2, 19);
        let x_b = random_image(16, 20);
        let s = live_series(ResidualMode::Magnitude, 2, 4);
        let a = r2d2_infer(&s, &x_b, &model, 2, None).unwrap();
        let b = r2d2_infer(&s, &x_b, &model, 2, None).unwrap();
        assert_eq!(a.final_estimate(), b.final_estimate());
        assert!(r2d2_infer(&s, &x_b, &model, 3, None).is_err());
        let none = r2d2_infer(&s, &x_b, &model, 0, None).unwrap();
        assert_eq!(none.trace.len(), 1);
    }

    #[test]
    fn series_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = live_series(ResidualMode::Complex, 2, 5);
        s.save(dir.path()).unwrap();
        let back = ModuleSeries::load(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.mode, ResidualMode::Complex);
        for (a, b) in s.modules.iter().zip(&back.modules) {
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let mut s = live_series(ResidualMode::Magnitude, 2, 6);
        s.modules[1].config.base_channels = 8;
        assert!(s.validate().is_err());
        let arch4 = ArchConfig { in_channels: 4, ..s.arch.clone() };
        assert!(ModuleSeries::new(arch4, ResidualMode::Magnitude, vec![], s.provenance.clone()).is_err());
    }
}
