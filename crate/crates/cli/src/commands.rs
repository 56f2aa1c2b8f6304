use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nocs_core::masks::{MaskPattern, ALGORITHM_ID};
use nocs_core::{
    apply_mask, generate_mask, Mask, MaskSpec, NocsParams, QualityReport, ReconstructionProblem,
    Reconstructor,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::io::{self, MultiBand};

pub const CSV_HEADER: &str = "image,psnr_db,ssim,seconds";

/// How to obtain the mask for a masking run.
#[derive(Debug, Clone)]
pub enum MaskSource {
    File(PathBuf),
    Generate {
        pattern: MaskPattern,
        density: f64,
        /// `None` scales the default with the image size.
        element_size: Option<usize>,
        seed: u64,
    },
}

impl MaskSource {
    fn spec(pattern: MaskPattern, density: f64, element_size: Option<usize>, seed: u64, w: usize, h: usize) -> MaskSpec {
        let mut spec = MaskSpec::new(w, h, pattern, seed);
        spec.density = density;
        if let Some(e) = element_size {
            spec.element_size = e;
        }
        spec
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub channel: usize,
    pub params: NocsParams,
    pub threads: Option<usize>,
    pub progress: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: 1,
            params: NocsParams::default(),
            threads: None,
            progress: false,
        }
    }
}

fn mask_metadata(spec: &MaskSpec) -> String {
    let meta = serde_json::json!({
        "algorithm": ALGORITHM_ID,
        "pattern": spec.pattern.name(),
        "width": spec.width,
        "height": spec.height,
        "density": spec.density,
        "element_size": spec.element_size,
        "seed": spec.seed,
    });
    serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn check_mask_dims(mask: &Mask, img: &MultiBand) -> Result<(), CliError> {
    if mask.width() != img.width || mask.height() != img.height {
        return Err(CliError::Validation(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            img.width,
            img.height
        )));
    }
    Ok(())
}

/// Writes the mask and a copy of the input with band `channel` multiplied by it.
pub fn cmd_mask(input: &Path, output: &Path, mask_out: &Path, source: &MaskSource, channel: usize) -> Result<(), CliError> {
    let mut img = io::load_image(input)?;
    img.check_band(channel)?;
    let (mask, spec) = match source {
        MaskSource::File(p) => (io::load_mask(p)?, None),
        &MaskSource::Generate {
            pattern,
            density,
            element_size,
            seed,
        } => {
            let spec = MaskSource::spec(pattern, density, element_size, seed, img.width, img.height);
            (generate_mask(&spec)?, Some(spec))
        }
    };
    check_mask_dims(&mask, &img)?;
    for (v, &valid) in img.bands[channel].iter_mut().zip(mask.flags()) {
        if !valid {
            *v = 0;
        }
    }
    io::save_mask(mask_out, &mask)?;
    if let Some(spec) = spec {
        let meta = sidecar(mask_out);
        fs::write(&meta, mask_metadata(&spec)).map_err(|e| CliError::Input(format!("{}: {e}", meta.display())))?;
    }
    io::save_image(output, &img)
}

fn run_reconstruction(img: &MultiBand, mask: &Mask, config: &RunConfig) -> Result<Vec<u8>, CliError> {
    let references = (0..img.bands.len())
        .filter(|&i| i != config.channel)
        .map(|i| img.channel(i))
        .collect();
    let distorted = apply_mask(&img.channel(config.channel), mask)?;
    let problem = ReconstructionProblem::new(distorted, mask.clone(), references)?;
    let mut runner = Reconstructor::new(config.params);
    if let Some(t) = config.threads {
        runner = runner.threads(t);
    }
    if config.progress {
        runner = runner.on_progress(|p| {
            eprintln!(
                "iteration {}: {} pixels remaining{}",
                p.iteration,
                p.remaining,
                if p.emergency { " (emergency step)" } else { "" }
            )
        });
    }
    Ok(io::quantize(&runner.run(&problem)?.channel))
}

/// Reconstructs band `config.channel` of `input` where `mask` is 0; all other bands
/// pass through unchanged.
pub fn cmd_reconstruct(input: &Path, mask: &Path, output: &Path, config: &RunConfig) -> Result<(), CliError> {
    config.params.validate()?;
    let mut img = io::load_image(input)?;
    let mask = io::load_mask(mask)?;
    img.check_band(config.channel)?;
    check_mask_dims(&mask, &img)?;
    img.bands[config.channel] = run_reconstruction(&img, &mask, config)?;
    io::save_image(output, &img)
}

fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p:.4}")
    }
}

fn csv_row(name: &str, report: &QualityReport, seconds: Option<f64>) -> String {
    format!(
        "{name},{},{:.6},{}\n",
        fmt_psnr(report.psnr_db),
        report.ssim,
        seconds.map(|s| format!("{s:.3}")).unwrap_or_default()
    )
}

fn evaluate_band(clean: &MultiBand, test: &MultiBand, channel: usize) -> Result<QualityReport, CliError> {
    if (clean.width, clean.height) != (test.width, test.height) {
        return Err(CliError::Validation(format!(
            "images differ in size: {}x{} vs {}x{}",
            clean.width, clean.height, test.width, test.height
        )));
    }
    for img in [clean, test] {
        if channel >= img.bands.len() {
            return Err(CliError::Validation(format!(
                "channel {channel} out of range for {} bands",
                img.bands.len()
            )));
        }
    }
    Ok(QualityReport::compute(&clean.channel(channel), &test.channel(channel))?)
}

/// Human-readable summary line, e.g. `PSNR: 28.13 dB, SSIM: 0.912`.
pub fn format_report(report: &QualityReport) -> String {
    format!("PSNR: {:.2} dB, SSIM: {:.3}", report.psnr_db, report.ssim)
}

/// Compares one band of two images; appends a CSV row when `csv` is given.
pub fn cmd_evaluate(clean: &Path, reconstructed: &Path, channel: usize, csv: Option<&Path>) -> Result<QualityReport, CliError> {
    let report = evaluate_band(&io::load_image(clean)?, &io::load_image(reconstructed)?, channel)?;
    if let Some(csv) = csv {
        let fresh = fs::metadata(csv).map(|m| m.len() == 0).unwrap_or(true);
        let mut text = String::new();
        if fresh {
            text.push_str(CSV_HEADER);
            text.push('\n');
        }
        text.push_str(&csv_row(&reconstructed.display().to_string(), &report, None));
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| CliError::Input(format!("{}: {e}", csv.display())))?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub run: RunConfig,
    pub pattern: MaskPattern,
    pub density: f64,
    pub element_size: Option<usize>,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Fill the `seconds` column with wall-clock time; off keeps output reproducible.
    pub timing: bool,
}

fn batch_one(path: &Path, index: usize, config: &BatchConfig) -> Result<(QualityReport, f64), CliError> {
    let start = Instant::now();
    let clean = io::load_image(path)?;
    let channel = config.run.channel;
    clean.check_band(channel)?;
    let spec = MaskSource::spec(
        config.pattern,
        config.density,
        config.element_size,
        config.base_seed.wrapping_add(index as u64),
        clean.width,
        clean.height,
    );
    let mask = generate_mask(&spec)?;
    let mut restored = clean.clone();
    restored.bands[channel] = run_reconstruction(&clean, &mask, &config.run)?;
    if let Some(dir) = &config.out_dir {
        io::save_image(&dir.join(path.file_name().expect("listed file")), &restored)?;
    }
    let report = evaluate_band(&clean, &restored, channel)?;
    Ok((report, start.elapsed().as_secs_f64()))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Masks, reconstructs and scores every image in `dir` (sorted by file name).
/// Returns the CSV text: header, one row per image, then a `mean` row.
pub fn cmd_batch(dir: &Path, config: &BatchConfig) -> Result<String, CliError> {
    config.run.params.validate()?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && io::is_image_path(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no images found", dir.display())));
    }
    if let Some(out) = &config.out_dir {
        fs::create_dir_all(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    }

    let results: Vec<_> = files
        .par_iter()
        .enumerate()
        .map(|(i, p)| batch_one(p, i, config))
        .collect();

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for (path, result) in files.iter().zip(&results) {
        let name = path.file_name().expect("listed file").to_string_lossy();
        match result {
            Ok((report, secs)) => csv.push_str(&csv_row(&name, report, config.timing.then_some(*secs))),
            Err(e) => {
                eprintln!("{name}: {e}");
                let _ = writeln!(csv, "{name},error,error,");
            }
        }
    }
    let ok: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    match (mean(ok.iter().map(|r| r.0.psnr_db)), mean(ok.iter().map(|r| r.0.ssim))) {
        (Some(p), Some(s)) => {
            let secs = config.timing.then(|| mean(ok.iter().map(|r| r.1))).flatten();
            csv.push_str(&csv_row(
                "mean",
                &QualityReport {
                    psnr_db: p,
                    ssim: s,
                },
                secs,
            ));
        }
        _ => csv.push_str("mean,error,error,\n"),
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nocs_core::Channel;

    #[test]
    fn report_formatting() {
        let r = QualityReport {
            psnr_db: f64::INFINITY,
            ssim: 1.0,
        };
        assert_eq!(format_report(&r), "PSNR: inf dB, SSIM: 1.000");
        assert_eq!(csv_row("a.png", &r, None), "a.png,inf,1.000000,\n");
        let r = QualityReport {
            psnr_db: 28.1308,
            ssim: 0.91234,
        };
        assert_eq!(csv_row("b", &r, Some(1.25)), "b,28.1308,0.912340,1.250\n");
    }

    #[test]
    fn metadata_names_algorithm() {
        let spec = MaskSpec::new(10, 10, MaskPattern::RectLoss, 4);
        let meta: serde_json::Value = serde_json::from_str(&mask_metadata(&spec)).unwrap();
        assert_eq!(meta["algorithm"], ALGORITHM_ID);
        assert_eq!(meta["seed"], 4);
        assert_eq!(meta["pattern"], "rect_loss");
    }

    #[test]
    fn sidecar_appends_json() {
        assert_eq!(sidecar(Path::new("out/m.png")), PathBuf::from("out/m.png.json"));
    }

    #[test]
    fn channel_out_of_range() {
        let img = MultiBand {
            width: 1,
            height: 1,
            bands: vec![vec![0], vec![0]],
        };
        assert!(img.check_band(1).is_ok());
        assert!(matches!(img.check_band(2), Err(CliError::Validation(_))));
        let single = MultiBand {
            width: 1,
            height: 1,
            bands: vec![vec![0]],
        };
        assert!(matches!(single.check_band(0), Err(CliError::Validation(_))));
    }

    #[test]
    fn quantized_recovery_of_exact_channel() {
        let w = 40;
        let red = Channel::from_fn(w, w, |r, c| (((r * 13 + c * 7) % 100) * 2) as f64);
        let green: Vec<u8> = red.values().iter().map(|v| (0.5 * v + 30.0) as u8).collect();
        let img = MultiBand {
            width: w,
            height: w,
            bands: vec![io::quantize(&red), green.clone(), vec![9; w * w]],
        };
        let mask = Mask::from_fn(w, w, |r, c| (r * 3 + c) % 7 != 0);
        let config = RunConfig {
            params: NocsParams {
                search_radius: 8,
                ..NocsParams::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(run_reconstruction(&img, &mask, &config).unwrap(), green);
    }
}
