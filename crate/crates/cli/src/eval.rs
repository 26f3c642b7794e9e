use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use r2d2_core::export::write_csv;
use r2d2_core::rawio;
use r2d2_core::simulate::dataset::{manifest_hash, DatasetManifest};

use crate::provenance::Provenance;
use crate::reconstruct::{ReconRecord, RECON_FILE};

pub const TABLE_FILE: &str = "table.csv";
pub const TABLE_TEXT_FILE: &str = "table.txt";
pub const CURVES_FILE: &str = "curves.csv";
pub const ITEMS_FILE: &str = "items.csv";

pub const TABLE_HEADER: [&str; 11] = [
    "af", "n_spokes", "count", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std", "t_load", "t_infer", "t_residual", "t_total",
];
pub const CURVES_HEADER: [&str; 10] = [
    "af", "n_spokes", "iteration", "count", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std", "rdr_mean", "rdr_std",
];
pub const ITEMS_HEADER: [&str; 11] = [
    "id", "af", "n_spokes", "dr", "psnr", "ssim", "rdr", "t_load", "t_infer", "t_residual", "t_total",
];

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output root of `reconstruct`.
    #[arg(long)]
    pub recons: PathBuf,
    /// Data set root to cross-check spoke counts against.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn load_records(root: &Path) -> Result<Vec<ReconRecord>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RECON_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| rawio::read_json::<ReconRecord>(&d.join(RECON_FILE)).map_err(Into::into))
        .collect()
}

fn final_metrics(r: &ReconRecord) -> Result<(f64, f64, f64)> {
    let last = r.trace.last().with_context(|| format!("{}: empty trace", r.id))?;
    match (last.psnr, last.ssim) {
        (Some(p), Some(s)) => Ok((p, s, last.rdr)),
        _ => bail!("{}: trace has no ground-truth metrics", r.id),
    }
}

fn cross_check(records: &[ReconRecord], root: &Path) -> Result<()> {
    let m = DatasetManifest::load(root)?;
    let by_id: BTreeMap<&str, _> = m.items.iter().map(|i| (i.id.as_str(), i)).collect();
    for r in records {
        let Some(item) = by_id.get(r.id.as_str()) else {
            bail!("{} is not in the data set at {}", r.id, root.display());
        };
        if item.n_spokes != r.n_spokes {
            bail!("{}: reconstruction used {} spokes, manifest says {}", r.id, r.n_spokes, item.n_spokes);
        }
        if item.split == r2d2_core::simulate::dataset::Split::Test && !m.config.test_spokes.contains(&r.n_spokes) {
            bail!("{}: {} spokes is not on the test grid {:?}", r.id, r.n_spokes, m.config.test_spokes);
        }
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn run(args: Args) -> Result<()> {
    let records = load_records(&args.recons)?;
    if records.is_empty() {
        bail!("no reconstructions found under {}", args.recons.display());
    }
    let mut prov = Provenance::new("eval", None, &serde_json::json!({ "recons": args.recons, "data": args.data }))?;
    if let Some(root) = &args.data {
        cross_check(&records, root)?;
        prov = prov.input("manifest_sha256", manifest_hash(root)?);
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut groups: BTreeMap<usize, Vec<&ReconRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry(r.n_spokes).or_default().push(r);
    }
    let mut item_rows = Vec::new();
    for r in &records {
        let (p, s, rdr) = final_metrics(r)?;
        item_rows.push(vec![
            r.id.clone(),
            fmt(r.acceleration_factor),
            r.n_spokes.to_string(),
            fmt(r.dr),
            fmt(p),
            fmt(s),
            fmt(rdr),
            fmt(r.t_load),
            fmt(r.t_infer),
            fmt(r.t_residual),
            fmt(r.t_total),
        ]);
    }
    write_csv(&args.out.join(ITEMS_FILE), &ITEMS_HEADER, &item_rows)?;

    let mut table = Vec::new();
    let mut curves = Vec::new();
    let mut text = String::new();
    writeln!(text, "{:>6} {:>7} {:>5} {:>16} {:>16} {:>9} {:>9} {:>9} {:>9}", "AF", "spokes", "n", "PSNR (dB)", "SSIM", "t_load", "t_infer", "t_resid", "t_total")?;
    // Fewest spokes (highest acceleration) first.
    for (&spokes, rs) in groups.iter() {
        let af = rs[0].acceleration_factor;
        let finals: Vec<(f64, f64, f64)> = rs.iter().map(|r| final_metrics(r)).collect::<Result<_>>()?;
        let (pm, ps) = mean_std(&finals.iter().map(|f| f.0).collect::<Vec<_>>());
        let (sm, ss) = mean_std(&finals.iter().map(|f| f.1).collect::<Vec<_>>());
        let t = |f: fn(&ReconRecord) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
        let times = [t(|r| r.t_load), t(|r| r.t_infer), t(|r| r.t_residual), t(|r| r.t_total)];
        let mut row = vec![fmt(af), spokes.to_string(), rs.len().to_string(), fmt(pm), fmt(ps), fmt(sm), fmt(ss)];
        row.extend(times.iter().map(|&v| fmt(v)));
        table.push(row);
        let line = format!(
            "{af:>6.2} {spokes:>7} {:>5} {:>16} {:>16} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            rs.len(),
            format!("{pm:.2} ± {ps:.2}"),
            format!("{sm:.4} ± {ss:.4}"),
            times[0],
            times[1],
            times[2],
            times[3]
        );
        writeln!(text, "{line}")?;

        let n_iter = rs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
        for it in 0..n_iter {
            let rows: Vec<_> = rs.iter().map(|r| &r.trace[it]).collect();
            let psnr: Vec<f64> = rows.iter().filter_map(|t| t.psnr).collect();
            let ssim: Vec<f64> = rows.iter().filter_map(|t| t.ssim).collect();
            let rdr: Vec<f64> = rows.iter().map(|t| t.rdr).collect();
            let (pm, ps) = mean_std(&psnr);
            let (sm, ss) = mean_std(&ssim);
            let (rm, rsd) = mean_std(&rdr);
            curves.push(vec![fmt(af), spokes.to_string(), it.to_string(), rs.len().to_string(), fmt(pm), fmt(ps), fmt(sm), fmt(ss), fmt(rm), fmt(rsd)]);
        }
    }
    write_csv(&args.out.join(TABLE_FILE), &TABLE_HEADER, &table)?;
    write_csv(&args.out.join(CURVES_FILE), &CURVES_HEADER, &curves)?;
    let p = args.out.join(TABLE_TEXT_FILE);
    std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
    print!("{text}");
    prov.write(&args.out)?;
    info!("evaluated {} reconstruction(s) in {} group(s)", records.len(), groups.len());
    Ok(())
}
