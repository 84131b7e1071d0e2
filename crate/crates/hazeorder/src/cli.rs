//! Command-line interface: `dehaze`, `synth`, `eval`, and `analyze`
//! subcommands with CSV report emission and directory batch modes.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{depth_order_correlation, row_profile, OrderReference};
use crate::error::{Error, Result};
use crate::image::{AtmosphericLight, DehazeConfig, WeightFn};
use crate::io::{read_depth, read_image, render_map, write_image, write_pfm};
use crate::metrics::{ciede2000, psnr, ssim};
use crate::pipeline::{color_difference, dehaze_with, extract_depth_order, synthesize_haze, SynthParams};

#[derive(Parser)]
#[command(
    name = "hazeorder",
    version,
    about = "Depth-order-guided single image dehazing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove haze from an image (or every image in a directory)
    Dehaze(DehazeArgs),
    /// Synthesize a hazy image from a clear image and a depth map
    Synth(SynthArgs),
    /// Compare restored images against ground truth with PSNR/SSIM/CIEDE2000
    Eval(EvalArgs),
    /// Inspect the extracted depth order of a hazy image
    Analyze(AnalyzeArgs),
}

/// Parsed `--airlight` value; a newtype so clap does not mistake the inner
/// Vec for a multi-occurrence argument.
#[derive(Clone)]
struct AirlightSpec(Vec<f64>);

fn parse_airlight(s: &str) -> std::result::Result<AirlightSpec, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    if parts.len() != 1 && parts.len() != 3 {
        return Err("expected R,G,B or a single gray value".into());
    }
    if parts.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("airlight components must be in [0,1]".into());
    }
    Ok(AirlightSpec(parts))
}

fn parse_beta(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("beta must be > 0".into())
    }
}

fn parse_weight_fn(s: &str) -> std::result::Result<WeightFn, String> {
    WeightFn::parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct DehazeArgs {
    /// Input image, or a directory of images
    input: PathBuf,
    /// Output path (a directory when the input is a directory)
    #[arg(short, long)]
    output: PathBuf,
    /// Patch size for depth-order extraction (odd)
    #[arg(long, default_value_t = 35)]
    r: usize,
    /// Fraction of pixels allowed to reach the [0,1] boundary
    #[arg(long, default_value_t = 0.02)]
    epsilon: f64,
    /// Weight function: phi1 | phi2 | phi3
    #[arg(long, default_value = "phi2", value_parser = parse_weight_fn)]
    weight_fn: WeightFn,
    /// Skip the CLAHE post-step
    #[arg(long)]
    no_clahe: bool,
    /// Override airlight estimation with fixed R,G,B values in [0,1]
    #[arg(long, value_parser = parse_airlight)]
    airlight: Option<AirlightSpec>,
    /// Save the refined transmission map as 8-bit gray
    #[arg(long)]
    save_transmission: Option<PathBuf>,
    /// Save the theta_r map as 8-bit gray
    #[arg(long)]
    save_theta: Option<PathBuf>,
    /// Append per-image run report rows to this CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Debug: set the global target to SCALE * max(theta_r) instead of the
    /// boundary-percentile optimization
    #[arg(long, value_name = "SCALE")]
    theta_hat_scale: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Clear (haze-free) input image
    clear: PathBuf,
    /// Depth map: 16-bit gray PNG or PFM
    #[arg(long)]
    depth: PathBuf,
    /// Scattering coefficient
    #[arg(long, default_value_t = 1.0, value_parser = parse_beta)]
    beta: f64,
    /// Airlight R,G,B in [0,1]
    #[arg(long, value_parser = parse_airlight)]
    airlight: AirlightSpec,
    /// Output hazy image
    #[arg(short, long)]
    output: PathBuf,
    /// Save the true transmission map (PFM for exact floats, else 8-bit gray)
    #[arg(long)]
    save_t: Option<PathBuf>,
    /// Depth value corresponding to 16-bit PNG full scale
    #[arg(long, default_value_t = 10.0)]
    depth_scale: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Restored image or directory
    restored: PathBuf,
    /// Ground-truth image or directory (matched by filename)
    ground_truth: PathBuf,
    /// Comma-separated subset of psnr,ssim,ciede2000
    #[arg(long, default_value = "psnr,ssim,ciede2000")]
    metrics: String,
    /// Append metric rows to this CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Hazy input image
    hazy: PathBuf,
    /// Ground-truth depth map
    #[arg(long, conflicts_with = "gt_clear")]
    gt_depth: Option<PathBuf>,
    /// Paired haze-free image
    #[arg(long)]
    gt_clear: Option<PathBuf>,
    /// Patch size for depth-order extraction (odd)
    #[arg(long, default_value_t = 35)]
    r: usize,
    /// Write the per-row theta_r profile CSV here
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Print the Spearman rho report row
    #[arg(long)]
    rho: bool,
    /// Rank every pixel instead of subsampling large images
    #[arg(long)]
    full_rank: bool,
    /// Depth value corresponding to 16-bit PNG full scale
    #[arg(long, default_value_t = 10.0)]
    depth_scale: f64,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Dehaze(args) => cmd_dehaze(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn airlight_from(values: &[f64], channels: usize) -> Result<AtmosphericLight> {
    let components = if values.len() == channels {
        values.to_vec()
    } else if values.len() == 1 && channels == 3 {
        vec![values[0]; 3]
    } else if values.len() == 3 && channels == 1 {
        // gray image with RGB airlight: use its luma
        vec![0.299 * values[0] + 0.587 * values[1] + 0.114 * values[2]]
    } else {
        return Err(Error::Config(
            "airlight component count does not match the image".into(),
        ));
    };
    AtmosphericLight::new(components)
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pgm"))
        .unwrap_or(false)
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();
    Ok(files)
}

fn batch_pool() -> rayon::ThreadPool {
    let threads = std::env::var("HAZEORDER_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("rayon pool")
}

struct RunRow {
    input: PathBuf,
    output: PathBuf,
    ms: f64,
    theta_hat_clear: f64,
    overflow_fraction: f64,
}

fn append_run_rows(path: &Path, cfg: &DehazeConfig, rows: &[RunRow]) -> Result<()> {
    let new_file = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e.to_string()))?;
    let mut writer = std::io::BufWriter::new(file);
    if new_file {
        writeln!(
            writer,
            "input,output,ms,r,epsilon,weight_fn,theta_hat_clear,overflow_fraction"
        )
        .map_err(|e| Error::io(path, e.to_string()))?;
    }
    for row in rows {
        writeln!(
            writer,
            "{},{},{:.3},{},{},{},{:.6},{:.6}",
            row.input.display(),
            row.output.display(),
            row.ms,
            cfg.r,
            cfg.epsilon,
            cfg.weight_fn.name(),
            row.theta_hat_clear,
            row.overflow_fraction
        )
        .map_err(|e| Error::io(path, e.to_string()))?;
    }
    Ok(())
}

fn dehaze_one(
    input: &Path,
    output: &Path,
    cfg: &DehazeConfig,
    airlight: &Option<AirlightSpec>,
    save_transmission: Option<&Path>,
    save_theta: Option<&Path>,
) -> Result<RunRow> {
    let img = read_image(input)?;
    let airlight = match airlight {
        Some(values) => Some(airlight_from(&values.0, img.channels())?),
        None => None,
    };
    let start = Instant::now();
    let (out, trace) = dehaze_with(&img, cfg, airlight)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    write_image(output, &out)?;
    if let Some(path) = save_transmission {
        write_image(path, &render_map(&trace.t_refined))?;
    }
    if let Some(path) = save_theta {
        write_image(path, &render_map(&trace.theta_r_haze))?;
    }
    Ok(RunRow {
        input: input.to_path_buf(),
        output: output.to_path_buf(),
        ms,
        theta_hat_clear: trace.theta_hat_clear,
        overflow_fraction: trace.overflow_fraction,
    })
}

fn cmd_dehaze(args: DehazeArgs) -> Result<i32> {
    let cfg = DehazeConfig {
        r: args.r,
        epsilon: args.epsilon,
        weight_fn: args.weight_fn,
        apply_clahe: !args.no_clahe,
        theta_hat_scale: args.theta_hat_scale,
        ..DehazeConfig::default()
    };
    cfg.validate()?;

    let rows = if args.input.is_dir() {
        let inputs = list_images(&args.input)?;
        std::fs::create_dir_all(&args.output)
            .map_err(|e| Error::io(&args.output, e.to_string()))?;
        let pool = batch_pool();
        let results: Vec<(usize, std::result::Result<RunRow, Error>)> = pool.install(|| {
            use rayon::prelude::*;
            inputs
                .par_iter()
                .enumerate()
                .map(|(i, input)| {
                    let out = args.output.join(input.file_name().unwrap()).with_extension("png");
                    (i, dehaze_one(input, &out, &cfg, &args.airlight, None, None))
                })
                .collect()
        });
        let mut sorted = results;
        sorted.sort_by_key(|(i, _)| *i);
        let mut rows = Vec::new();
        for (_, res) in sorted {
            match res {
                Ok(row) => rows.push(row),
                Err(e) => eprintln!("warning: {e}"),
            }
        }
        rows
    } else {
        vec![dehaze_one(
            &args.input,
            &args.output,
            &cfg,
            &args.airlight,
            args.save_transmission.as_deref(),
            args.save_theta.as_deref(),
        )?]
    };

    for row in &rows {
        println!(
            "{} -> {} ({:.1} ms, theta_hat={:.4}, overflow={:.4})",
            row.input.display(),
            row.output.display(),
            row.ms,
            row.theta_hat_clear,
            row.overflow_fraction
        );
    }
    if let Some(trace) = &args.trace {
        append_run_rows(trace, &cfg, &rows)?;
    }
    Ok(0)
}

fn cmd_synth(args: SynthArgs) -> Result<i32> {
    let clear = read_image(&args.clear)?;
    let depth = read_depth(&args.depth, args.depth_scale)?;
    let airlight = airlight_from(&args.airlight.0, clear.channels())?;
    let params = SynthParams::new(args.beta, airlight, depth)?;
    let hazy = synthesize_haze(&clear, &params)?;
    write_image(&args.output, &hazy)?;
    if let Some(path) = &args.save_t {
        let t = params.transmission();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
            write_pfm(path, &t)?;
        } else {
            write_image(path, &render_map(&t))?;
        }
    }
    println!("{} -> {}", args.clear.display(), args.output.display());
    Ok(0)
}

struct EvalRow {
    image: String,
    psnr: Option<f64>,
    ssim: Option<f64>,
    ciede: Option<f64>,
}

fn eval_pair(restored: &Path, gt: &Path, want: &[&str]) -> Result<EvalRow> {
    let a = read_image(restored)?;
    let b = read_image(gt)?;
    let name = restored
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| restored.display().to_string());
    Ok(EvalRow {
        image: name,
        psnr: if want.contains(&"psnr") { Some(psnr(&a, &b)?) } else { None },
        ssim: if want.contains(&"ssim") { Some(ssim(&a, &b)?) } else { None },
        ciede: if want.contains(&"ciede2000") && a.channels() == 3 {
            Some(ciede2000(&a, &b)?)
        } else {
            None
        },
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let want: Vec<&str> = args.metrics.split(',').map(|s| s.trim()).collect();
    for m in &want {
        if !matches!(*m, "psnr" | "ssim" | "ciede2000") {
            return Err(Error::Config(format!("unknown metric '{m}'")));
        }
    }

    let mut rows = Vec::new();
    if args.restored.is_dir() {
        let restored = list_images(&args.restored)?;
        let mut skipped = Vec::new();
        for path in &restored {
            let gt = args.ground_truth.join(path.file_name().unwrap());
            if !gt.exists() {
                skipped.push(path.clone());
                continue;
            }
            match eval_pair(path, &gt, &want) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    eprintln!("warning: {e}");
                    skipped.push(path.clone());
                }
            }
        }
        for s in &skipped {
            eprintln!("warning: no ground truth match for {}", s.display());
        }
        if rows.is_empty() && !restored.is_empty() {
            return Err(Error::Structure("no image pairs could be evaluated".into()));
        }
    } else {
        rows.push(eval_pair(&args.restored, &args.ground_truth, &want)?);
    }

    println!("image,psnr_db,ssim,ciede2000");
    for row in &rows {
        println!(
            "{},{},{},{}",
            row.image,
            fmt_opt(row.psnr),
            fmt_opt(row.ssim),
            fmt_opt(row.ciede)
        );
    }
    if let Some(path) = &args.csv {
        let new_file = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e.to_string()))?;
        let mut writer = std::io::BufWriter::new(file);
        if new_file {
            writeln!(writer, "image,psnr_db,ssim,ciede2000")
                .map_err(|e| Error::io(path, e.to_string()))?;
        }
        for row in &rows {
            writeln!(
                writer,
                "{},{},{},{}",
                row.image,
                fmt_opt(row.psnr),
                fmt_opt(row.ssim),
                fmt_opt(row.ciede)
            )
            .map_err(|e| Error::io(path, e.to_string()))?;
        }
    }
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let hazy = read_image(&args.hazy)?;
    let image_id = args
        .hazy
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.hazy.display().to_string());

    let reference = if let Some(path) = &args.gt_depth {
        Some(OrderReference::Depth(read_depth(path, args.depth_scale)?))
    } else {
        args.gt_clear
            .as_ref()
            .map(|path| read_image(path).map(OrderReference::Clear))
            .transpose()?
    };

    let profile = match &reference {
        Some(reference) => {
            let report = depth_order_correlation(&hazy, reference, args.r, args.full_rank)?;
            println!("image_id,r,rho,n_pixels");
            println!("{},{},{:.6},{}", image_id, report.patch_size, report.rho, report.n_pixels);
            report.row_profile
        }
        None => {
            let airlight = crate::airlight::estimate_airlight(&hazy)?;
            let theta_r = extract_depth_order(&color_difference(&hazy, &airlight)?, args.r)?;
            let profile = row_profile(&theta_r);
            if args.rho {
                eprintln!("warning: --rho needs --gt-depth or --gt-clear; emitting profile only");
            }
            profile
        }
    };

    if let Some(path) = &args.profile {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e.to_string()))?;
        let mut writer = std::io::BufWriter::new(file);
        writeln!(writer, "row_index,mean_theta_r").map_err(|e| Error::io(path, e.to_string()))?;
        for (i, v) in profile.iter().enumerate() {
            writeln!(writer, "{i},{v:.6}").map_err(|e| Error::io(path, e.to_string()))?;
        }
    } else if reference.is_none() {
        println!("row_index,mean_theta_r");
        for (i, v) in profile.iter().enumerate() {
            println!("{i},{v:.6}");
        }
    }
    Ok(0)
}
