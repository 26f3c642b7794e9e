//! Synthetic data sets: one inverse problem per phantom, written as item
//! directories under a root with a `manifest.json` index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::problem::PROBLEM_FILE;
use super::{make_phantom, simulate_acquisition, InverseProblem, NoiseConvention, DEFAULT_N_ELLIPSES, DEFAULT_PERCENTILE};
use crate::coil::{synth_sensitivities, KappaNorm, MeasurementModel};
use crate::dcomp::{pipe_menon, DcWeights, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::nufft::{NufftPlan, DEFAULT_KERNEL_WIDTH, DEFAULT_OVERSAMPLING};
use crate::rawio;
use crate::trajectory::{acceleration_factor, spokes_for_af, Trajectory};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// How the spoke count of a training or validation item is drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpokeSampling {
    /// Uniform over `min..=max`.
    Range { min: usize, max: usize },
    /// Uniform over the listed values.
    Grid { values: Vec<usize> },
}

impl SpokeSampling {
    fn validate(&self) -> Result<()> {
        match self {
            SpokeSampling::Range { min, max } if *min >= 1 && min <= max => Ok(()),
            SpokeSampling::Grid { values } if !values.is_empty() && values.iter().all(|&v| v >= 1) => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid spoke sampling {other:?}"))),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            SpokeSampling::Range { min, max } => rng.random_range(*min..=*max),
            SpokeSampling::Grid { values } => values[rng.random_range(0..values.len())],
        }
    }

    fn values(&self) -> Vec<usize> {
        match self {
            SpokeSampling::Range { min, max } => (*min..=*max).collect(),
            SpokeSampling::Grid { values } => values.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub side: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub spokes: SpokeSampling,
    /// Test items cycle through these spoke counts in order.
    pub test_spokes: Vec<usize>,
    pub coils_min: usize,
    pub coils_max: usize,
    pub n_ellipses: usize,
    pub percentile: f64,
    pub master_seed: u64,
    pub noise_convention: NoiseConvention,
    pub kappa_norm: KappaNorm,
    pub oversampling: f64,
    pub kernel_width: usize,
    pub dc_max_iters: usize,
    pub dc_tol: f64,
}

/// Spoke counts for the given acceleration factors at `side`, rounded to nearest.
pub fn spokes_for_afs(side: usize, afs: &[f64]) -> Vec<usize> {
    afs.iter().map(|&af| spokes_for_af(side, af)).collect()
}

/// The six test acceleration factors.
pub const TEST_AFS: [f64; 6] = [16.0, 12.0, 8.0, 6.0, 4.0, 3.0];
/// Acceleration factors of the training grid used by the series experiments.
pub const TRAIN_AFS: [f64; 4] = [3.0, 4.0, 6.0, 8.0];

impl DatasetConfig {
    /// Spoke range `[10, 80]` and coils `[2, 8]`, spokes rescaled from a 192 side.
    pub fn scaled_range(side: usize, n_train: usize, n_val: usize, n_test: usize, master_seed: u64) -> Self {
        let scale = side as f64 / 192.0;
        Self {
            side,
            n_train,
            n_val,
            n_test,
            spokes: SpokeSampling::Range {
                min: ((10.0 * scale).round() as usize).max(1),
                max: ((80.0 * scale).round() as usize).max(1),
            },
            test_spokes: spokes_for_afs(side, &TEST_AFS),
            coils_min: 2,
            coils_max: 8,
            ..Self::af_grid(side, n_train, n_val, n_test, master_seed)
        }
    }

    /// Four coils, spokes from the `{3, 4, 6, 8}` acceleration grid.
    pub fn af_grid(side: usize, n_train: usize, n_val: usize, n_test: usize, master_seed: u64) -> Self {
        Self {
            side,
            n_train,
            n_val,
            n_test,
            spokes: SpokeSampling::Grid {
                values: spokes_for_afs(side, &TRAIN_AFS),
            },
            test_spokes: spokes_for_afs(side, &TEST_AFS),
            coils_min: 4,
            coils_max: 4,
            n_ellipses: DEFAULT_N_ELLIPSES,
            percentile: DEFAULT_PERCENTILE,
            master_seed,
            noise_convention: NoiseConvention::default(),
            kappa_norm: KappaNorm::default(),
            oversampling: DEFAULT_OVERSAMPLING,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            dc_max_iters: DEFAULT_MAX_ITERS,
            dc_tol: DEFAULT_TOL,
        }
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidArgument("data set has no items".into()));
        }
        if self.side < 4 || !self.side.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("side must be even and >= 4, got {}", self.side)));
        }
        self.spokes.validate()?;
        if self.n_test > 0 && (self.test_spokes.is_empty() || self.test_spokes.contains(&0)) {
            return Err(Error::InvalidArgument("test split needs a non-empty spoke grid".into()));
        }
        if self.coils_min == 0 || self.coils_min > self.coils_max {
            return Err(Error::InvalidArgument(format!(
                "invalid coil range {}..={}",
                self.coils_min, self.coils_max
            )));
        }
        if self.n_ellipses == 0 {
            return Err(Error::InvalidArgument("n_ellipses must be at least 1".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 50.0) {
            return Err(Error::InvalidArgument(format!("percentile {} outside (0, 50]", self.percentile)));
        }
        Ok(())
    }
}

/// Index entry for one item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub split: Split,
    /// Item directory relative to the data set root.
    pub dir: String,
    pub seed: u64,
    pub n_spokes: usize,
    pub n_coils: usize,
    pub acceleration_factor: f64,
    pub sigma: f64,
    pub dr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub rng: String,
    pub config: DatasetConfig,
    pub items: Vec<ManifestItem>,
}

impl DatasetManifest {
    pub fn items_in(&self, split: Split) -> impl Iterator<Item = &ManifestItem> {
        self.items.iter().filter(move |i| i.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.items_in(split).count()
    }

    /// No duplicate ids and every referenced file exists under `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        let mut seen = HashSet::new();
        for item in &self.items {
            if !seen.insert(item.id.as_str()) {
                return Err(Error::format(root.join(MANIFEST_FILE), format!("duplicate id {}", item.id)));
            }
            let record_path = root.join(&item.dir).join(PROBLEM_FILE);
            let record: super::ProblemRecord = rawio::read_json(&record_path)?;
            if record.id != item.id {
                return Err(Error::format(record_path, format!("id {} does not match manifest {}", record.id, item.id)));
            }
            for f in &record.files {
                let p = root.join(&item.dir).join(f);
                if !p.exists() {
                    return Err(Error::format(p, "referenced file is missing"));
                }
            }
        }
        let expected = [
            (Split::Train, self.config.n_train),
            (Split::Val, self.config.n_val),
            (Split::Test, self.config.n_test),
        ];
        for (split, n) in expected {
            if self.count(split) != n {
                return Err(Error::format(
                    root.join(MANIFEST_FILE),
                    format!("{split} split has {} items, config says {n}", self.count(split)),
                ));
            }
        }
        Ok(())
    }

    /// Read and validate `root/manifest.json`.
    pub fn load(root: &Path) -> Result<Self> {
        let m: DatasetManifest = rawio::read_json(&root.join(MANIFEST_FILE))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::format(
                root.join(MANIFEST_FILE),
                format!("unsupported manifest version {}", m.format_version),
            ));
        }
        m.validate(root)?;
        Ok(m)
    }

    pub fn load_item(&self, root: &Path, item: &ManifestItem) -> Result<InverseProblem> {
        InverseProblem::load(&root.join(&item.dir))
    }
}

/// Hex SHA-256 of `root/manifest.json` as written.
pub fn manifest_hash(root: &Path) -> Result<String> {
    let p = root.join(MANIFEST_FILE);
    let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
    Ok(rawio::sha256_hex(&bytes))
}

struct ItemPlan {
    id: String,
    split: Split,
    seed: u64,
    n_spokes: usize,
    n_coils: usize,
    phantom_seed: u64,
    maps_seed: u64,
    noise_seed: u64,
}

fn plan_items(config: &DatasetConfig) -> Vec<ItemPlan> {
    let mut master = ChaCha8Rng::seed_from_u64(config.master_seed);
    let splits = [
        (Split::Train, config.n_train),
        (Split::Val, config.n_val),
        (Split::Test, config.n_test),
    ];
    let mut out = Vec::with_capacity(config.total());
    for (split, n) in splits {
        for i in 0..n {
            let seed: u64 = master.random();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_spokes = match split {
                Split::Test => config.test_spokes[i % config.test_spokes.len()],
                _ => config.spokes.draw(&mut rng),
            };
            let n_coils = rng.random_range(config.coils_min..=config.coils_max);
            out.push(ItemPlan {
                id: format!("{split}-{i:05}"),
                split,
                seed,
                n_spokes,
                n_coils,
                phantom_seed: rng.random(),
                maps_seed: rng.random(),
                noise_seed: rng.random(),
            });
        }
    }
    out
}

/// Gridding plan and density weights for every spoke count the config can draw.
type OperatorCache = BTreeMap<usize, (Arc<NufftPlan>, Arc<DcWeights>)>;

fn build_operators(config: &DatasetConfig) -> Result<OperatorCache> {
    let mut counts: Vec<usize> = config.spokes.values();
    if config.n_test > 0 {
        counts.extend(&config.test_spokes);
    }
    counts.sort_unstable();
    counts.dedup();
    let mut cache = BTreeMap::new();
    for n_spokes in counts {
        let traj = Arc::new(Trajectory::golden_angle_radial(n_spokes, config.side, 0)?);
        let plan = Arc::new(NufftPlan::new(traj, config.side, config.oversampling, config.kernel_width)?);
        let dc = Arc::new(pipe_menon(&plan, config.dc_max_iters, config.dc_tol)?);
        cache.insert(n_spokes, (plan, dc));
    }
    Ok(cache)
}

fn generate_item(config: &DatasetConfig, ops: &OperatorCache, p: &ItemPlan, root: &Path) -> Result<ManifestItem> {
    let (plan, dc) = ops.get(&p.n_spokes).expect("operator cache covers every drawn spoke count");
    let maps = Arc::new(synth_sensitivities(p.n_coils, config.side, p.maps_seed)?);
    let model = MeasurementModel::new(maps, plan.clone(), dc.clone(), config.kappa_norm)?;
    let phantom = make_phantom(config.side, config.n_ellipses, p.phantom_seed, config.percentile)?;
    let mut problem = simulate_acquisition(&p.id, &phantom, model, p.noise_seed, config.noise_convention)?;
    problem.seed = p.seed;
    let dir = format!("items/{}", p.id);
    problem.save(&root.join(&dir))?;
    Ok(ManifestItem {
        id: p.id.clone(),
        split: p.split,
        dir,
        seed: p.seed,
        n_spokes: p.n_spokes,
        n_coils: p.n_coils,
        acceleration_factor: acceleration_factor(config.side, p.n_spokes)?,
        sigma: phantom.sigma(),
        dr: phantom.dr(),
    })
}

/// Generate every item under `out_dir`, then write the manifest.
///
/// Items are independent given their seeds, so `threads` only affects speed.
/// Any item failure aborts before the manifest is written.
pub fn make_dataset(config: &DatasetConfig, out_dir: &Path, threads: usize) -> Result<DatasetManifest> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ops = build_operators(config)?;
    let plans = plan_items(config);
    let results = crate::parallel::par_map(&plans, threads, |_, plan| {
        Ok::<_, std::convert::Infallible>(generate_item(config, &ops, plan, out_dir))
    })
    .unwrap_or_else(|e| match e {});
    let mut items = Vec::with_capacity(plans.len());
    let mut failures: Vec<String> = Vec::new();
    for (p, r) in plans.iter().zip(results) {
        match r {
            Ok(item) => items.push(item),
            Err(e) => failures.push(format!("{}: {e}", p.id)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Numerical(format!(
            "{} of {} items failed; manifest not written: {}",
            failures.len(),
            plans.len(),
            failures.join("; ")
        )));
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        rng: RNG_ALGORITHM.to_string(),
        config: config.clone(),
        items,
    };
    rawio::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    manifest.validate(out_dir)?;
    Ok(manifest)
}

/// Path of an item directory.
pub fn item_dir(root: &Path, item: &ManifestItem) -> PathBuf {
    root.join(&item.dir)
}
