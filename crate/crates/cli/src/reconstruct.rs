use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use r2d2_core::export::write_pgm16;
use r2d2_core::rawio;
use r2d2_core::series::{r2d2_infer, ModuleSeries, TraceRow};
use r2d2_core::simulate::dataset::{item_dir, DatasetManifest, Split};
use r2d2_core::simulate::InverseProblem;
use serde::{Deserialize, Serialize};

use crate::provenance::Provenance;
use crate::usage;

pub const RECON_FILE: &str = "recon.json";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
pub enum Emit {
    /// `|x^(i)|` as a 16-bit PGM per iteration.
    Pgm,
    /// Per-iteration trace.
    Csv,
    /// Complex estimates as little-endian c128 with JSON sidecars.
    Raw,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Series directory written by `train`.
    #[arg(long)]
    pub series: PathBuf,
    /// Problem directories (each holding problem.json).
    #[arg(long, num_args = 1.., conflicts_with = "data")]
    pub problem: Vec<PathBuf>,
    /// Data set root; reconstructs every item of `--split`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test", requires = "data")]
    pub split: Split,
    /// Number of modules to apply (all of them if omitted).
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "pgm,csv")]
    pub emit: Vec<Emit>,
    /// Output root; each problem gets a subdirectory named by its id.
    #[arg(long)]
    pub out: PathBuf,
}

/// Per-problem summary read back by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconRecord {
    pub id: String,
    pub n_spokes: usize,
    pub acceleration_factor: f64,
    pub dr: f64,
    pub iterations: usize,
    pub t_load: f64,
    pub t_infer: f64,
    pub t_residual: f64,
    pub t_total: f64,
    pub telescoping_error: f64,
    pub trace: Vec<TraceRow>,
}

fn pgm_name(i: usize) -> String {
    format!("iter_{i:03}.pgm")
}

fn reconstruct_one(series: &ModuleSeries, t_series: f64, dir: &Path, max_iters: usize, emit: &[Emit], out_root: &Path) -> Result<ReconRecord> {
    let start = Instant::now();
    let problem = InverseProblem::load(dir).with_context(|| format!("loading problem {}", dir.display()))?;
    let t_load = t_series + start.elapsed().as_secs_f64();
    let record = problem.record()?;
    let inf = r2d2_infer(series, &problem.x_b, &problem.model, max_iters, Some(problem.gt()))
        .with_context(|| format!("reconstructing {}", problem.id))?;
    let trace = inf.trace_csv()?;
    let t_total = t_series + start.elapsed().as_secs_f64();
    let out = out_root.join(&problem.id);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let n = problem.side();
    // Iteration 0 is the back-projection, then x^(1) .. x^(I).
    let images = std::iter::once(&problem.x_b).chain(inf.estimates.iter().skip(1));
    for (i, x) in images.enumerate() {
        if emit.contains(&Emit::Pgm) {
            write_pgm16(&out.join(pgm_name(i)), &x.magnitude())?;
        }
        if emit.contains(&Emit::Raw) {
            let meta = serde_json::json!({ "id": problem.id, "iteration": i });
            rawio::write_c128(&out.join(format!("iter_{i:03}.c128")), x.data(), &[n, n], meta)?;
        }
    }
    if emit.contains(&Emit::Csv) {
        let p = out.join(TRACE_FILE);
        std::fs::write(&p, trace).with_context(|| format!("writing {}", p.display()))?;
    }
    let rec = ReconRecord {
        id: problem.id.clone(),
        n_spokes: record.n_spokes,
        acceleration_factor: record.acceleration_factor,
        dr: record.dr,
        iterations: max_iters,
        t_load,
        t_infer: inf.network_seconds,
        t_residual: inf.residual_seconds,
        t_total,
        telescoping_error: inf.telescoping_error()?,
        trace: inf.trace,
    };
    rawio::write_json(&out.join(RECON_FILE), &rec)?;
    Ok(rec)
}

pub fn run(args: Args) -> Result<()> {
    let start = Instant::now();
    let series = ModuleSeries::load(&args.series).with_context(|| format!("loading series {}", args.series.display()))?;
    let t_series = start.elapsed().as_secs_f64();
    let max_iters = args.max_iters.unwrap_or(series.len());
    let dirs: Vec<PathBuf> = match &args.data {
        Some(root) => {
            let m = DatasetManifest::load(root)?;
            m.items_in(args.split).map(|it| item_dir(root, it)).collect()
        }
        None => args.problem.clone(),
    };
    if dirs.is_empty() {
        return Err(usage("no problems given (use --problem or --data)"));
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for dir in &dirs {
        // Every problem is charged the series load, as a standalone run would be.
        let rec = reconstruct_one(&series, t_series, dir, max_iters, &args.emit, &args.out)?;
        let last = rec.trace.last().expect("trace has row 0");
        info!(
            "{}: {} iteration(s), psnr {:.2} dB, rdr {:.4}",
            rec.id,
            rec.iterations,
            last.psnr.unwrap_or(f64::NAN),
            last.rdr
        );
    }
    #[derive(Serialize)]
    struct Config<'a> {
        series: &'a Path,
        problems: &'a [PathBuf],
        max_iters: usize,
        emit: &'a [Emit],
    }
    let cfg = Config {
        series: &args.series,
        problems: &dirs,
        max_iters,
        emit: &args.emit,
    };
    Provenance::new("reconstruct", Some(series.provenance.seed), &cfg)?
        .input("dataset_sha256", series.provenance.dataset_hash.clone())
        .write(&args.out)?;
    Ok(())
}
