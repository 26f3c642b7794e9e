use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use super::{CoilCalibration, NoiseConvention, Phantom};
use crate::coil::{MeasurementModel, SensitivityMaps};
use crate::dcomp::DcWeights;
use crate::error::{ensure_len, Error, Result};
use crate::image::ComplexImage;
use crate::nufft::{KSpaceData, NufftPlan};
use crate::rawio;
use crate::trajectory::{acceleration_factor, Trajectory};

pub const PROBLEM_FILE: &str = "problem.json";
const GT_FILE: &str = "gt.c128";
const XB_FILE: &str = "xb.c128";
const DATA_FILE: &str = "data.c128";
const MAPS_FILE: &str = "maps.c128";
const TRAJECTORY_FILE: &str = "trajectory.f64";
const DC_FILE: &str = "dc.f64";

/// One simulated inverse problem: ground truth, operator, noisy data and back-projection.
#[derive(Clone, Debug)]
pub struct InverseProblem {
    pub id: String,
    pub seed: u64,
    pub phantom: Phantom,
    pub model: MeasurementModel,
    pub calibration: Vec<CoilCalibration>,
    pub tau: Vec<f64>,
    pub convention: NoiseConvention,
    pub data: Vec<KSpaceData>,
    pub x_b: ComplexImage,
}

/// Contents of `problem.json` in an item directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub seed: u64,
    pub side: usize,
    pub n_spokes: usize,
    pub n_coils: usize,
    pub acceleration_factor: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub dr: f64,
    pub percentile: f64,
    pub phantom_seed: u64,
    pub maps_seed: u64,
    pub tau: Vec<f64>,
    pub calibration: Vec<CoilCalibration>,
    pub noise_convention: NoiseConvention,
    pub oversampling: f64,
    pub kernel_width: usize,
    pub files: Vec<String>,
}

impl InverseProblem {
    pub fn side(&self) -> usize {
        self.model.side()
    }

    pub fn gt(&self) -> &ComplexImage {
        self.phantom.image()
    }

    pub fn record(&self) -> Result<ProblemRecord> {
        let traj = self.model.plan().trajectory();
        Ok(ProblemRecord {
            id: self.id.clone(),
            seed: self.seed,
            side: self.side(),
            n_spokes: traj.n_spokes(),
            n_coils: self.model.n_coils(),
            acceleration_factor: acceleration_factor(self.side(), traj.n_spokes())?,
            kappa: self.model.kappa(),
            sigma: self.phantom.sigma(),
            dr: self.phantom.dr(),
            percentile: self.phantom.percentile(),
            phantom_seed: self.phantom.seed(),
            maps_seed: self.model.maps().seed(),
            tau: self.tau.clone(),
            calibration: self.calibration.clone(),
            noise_convention: self.convention,
            oversampling: self.model.plan().oversampling(),
            kernel_width: self.model.plan().kernel().width,
            files: [GT_FILE, XB_FILE, DATA_FILE, MAPS_FILE, TRAJECTORY_FILE, DC_FILE]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        })
    }

    /// Write every array plus `problem.json` into `dir` (created if missing).
    pub fn save(&self, dir: &Path) -> Result<ProblemRecord> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let record = self.record()?;
        let n = self.side();
        let meta = serde_json::json!({ "id": self.id });
        rawio::write_c128(&dir.join(GT_FILE), self.gt().data(), &[n, n], meta.clone())?;
        rawio::write_c128(&dir.join(XB_FILE), self.x_b.data(), &[n, n], meta.clone())?;
        let flat: Vec<Complex64> = self.data.iter().flat_map(|y| y.values().iter().copied()).collect();
        rawio::write_c128(&dir.join(DATA_FILE), &flat, &[self.model.n_coils(), self.model.plan().n_samples()], meta)?;
        self.model.maps().save(&dir.join(MAPS_FILE))?;
        self.model.plan().trajectory().save(&dir.join(TRAJECTORY_FILE))?;
        self.model.dc().save(&dir.join(DC_FILE))?;
        rawio::write_json(&dir.join(PROBLEM_FILE), &record)?;
        Ok(record)
    }

    /// Reload a problem written by [`InverseProblem::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let record: ProblemRecord = rawio::read_json(&dir.join(PROBLEM_FILE))?;
        for f in &record.files {
            let p = dir.join(f);
            if !p.exists() {
                return Err(Error::format(p, "referenced file is missing"));
            }
        }
        let n = record.side;
        let (gt, _) = rawio::read_c128(&dir.join(GT_FILE))?;
        let (xb, _) = rawio::read_c128(&dir.join(XB_FILE))?;
        let traj = Arc::new(Trajectory::load(&dir.join(TRAJECTORY_FILE))?);
        let plan = Arc::new(NufftPlan::new(traj, n, record.oversampling, record.kernel_width)?);
        let dc = Arc::new(DcWeights::load(&dir.join(DC_FILE), plan.n_samples())?);
        let maps = Arc::new(SensitivityMaps::load(&dir.join(MAPS_FILE))?);
        ensure_len("problem coil count", record.n_coils, maps.n_coils())?;
        let model = MeasurementModel::with_kappa(maps, plan.clone(), dc, record.kappa)?;
        let (flat, _) = rawio::read_c128(&dir.join(DATA_FILE))?;
        ensure_len("problem data length", record.n_coils * plan.n_samples(), flat.len())?;
        let data = flat.chunks_exact(plan.n_samples()).map(|c| KSpaceData::new(c.to_vec())).collect();
        let phantom = Phantom::from_parts(ComplexImage::from_vec(n, gt)?, record.sigma, record.phantom_seed, record.percentile)?;
        Ok(Self {
            id: record.id,
            seed: record.seed,
            phantom,
            model,
            calibration: record.calibration,
            tau: record.tau,
            convention: record.noise_convention,
            data,
            x_b: ComplexImage::from_vec(n, xb)?,
        })
    }
}
