use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use speckle_ghost::gi::{BucketSpec, CorrAccumulator, CorrWarning, CorrelationImage, Selection, Technique};
use speckle_ghost::io::{export_image, ingest_to_file, write_csv, Scaling, StackReader, StackWriter};
use speckle_ghost::metrology::{
    resolution_r, smooth3, snr, sweep_frame_count, sweep_object_size, FomRow, RegionPair, SectionProfile, SweepSetup,
};
use speckle_ghost::pipeline::{map_frames, Parallelism, CHUNK_FRAMES};
use speckle_ghost::speckle::SpeckleSimulator;
use speckle_ghost::stats::{fit_mode_count, multi_pixel_correlation, spatial_autocorrelation, AutocorrFlag};
use speckle_ghost::{ArmLayout, Error, Frame, FrameSource, LightKind, Roi};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::exit::{CliError, CliResult, EXIT_METROLOGY};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub par: Parallelism,
}

/// Frames from a stack file, or simulated on demand from the configuration.
pub enum Input {
    File(StackReader),
    Sim {
        sim: SpeckleSimulator,
        n_frames: usize,
        seed: u64,
    },
}

impl FrameSource for Input {
    fn width(&self) -> usize {
        match self {
            Input::File(r) => r.width(),
            Input::Sim { sim, .. } => sim.config().grid_width,
        }
    }

    fn height(&self) -> usize {
        match self {
            Input::File(r) => r.height(),
            Input::Sim { sim, .. } => sim.config().grid_height,
        }
    }

    fn len(&self) -> usize {
        match self {
            Input::File(r) => r.len(),
            Input::Sim { n_frames, .. } => *n_frames,
        }
    }

    fn load(&self, index: usize, buf: &mut Frame) -> speckle_ghost::Result<()> {
        match self {
            Input::File(r) => r.load(index, buf),
            Input::Sim { sim, n_frames, seed } => sim.source(*n_frames, *seed).load(index, buf),
        }
    }
}

impl Input {
    fn arm_layout(&self) -> Option<ArmLayout> {
        match self {
            Input::File(r) => r.arm_layout(),
            Input::Sim { .. } => None,
        }
    }
}

impl Context {
    fn simulator(&self) -> CliResult<SpeckleSimulator> {
        Ok(SpeckleSimulator::new(&self.cfg.sim, self.cfg.run.light_kind)?)
    }

    fn input(&self, stack: Option<&Path>) -> CliResult<Input> {
        let input = match stack {
            Some(p) => Input::File(StackReader::open(p)?),
            None => Input::Sim {
                sim: self.simulator()?,
                n_frames: self.cfg.run.n_frames,
                seed: self.cfg.run.master_seed,
            },
        };
        self.cfg.validate(input.width(), input.height())?;
        Ok(input)
    }

    fn path(&self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.clone(),
            source: e,
        })?;
        Ok(self.out.join(name))
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> CliResult<()> {
        if self.cfg.wants(OutputFormat::Csv) {
            write_csv(self.path(name)?, rows)?;
        }
        Ok(())
    }

    fn image(&self, name: &str, image: &CorrelationImage) -> CliResult<()> {
        if self.cfg.wants(OutputFormat::Pgm) {
            export_image(image, self.path(name)?, Scaling::Linear)?;
        }
        Ok(())
    }
}

/// Object bucket, reference region and DGI reference bucket; `masked` is
/// false for camera stacks, whose object region is found by thresholding.
struct Geometry {
    object: BucketSpec,
    reference: Roi,
    ref_bucket: BucketSpec,
    masked: bool,
}

fn geometry(ctx: &Context, input: &Input) -> CliResult<Geometry> {
    let (w, h) = (input.width(), input.height());
    let a = &ctx.cfg.analysis;
    if let (Some(layout), None) = (input.arm_layout(), a.bucket_roi) {
        return Ok(Geometry {
            object: BucketSpec::open(layout.bucket)?,
            reference: a.reference_roi.map_or(layout.reference, crate::config::to_roi),
            ref_bucket: BucketSpec::open(a.ref_bucket_roi.map_or(layout.reference, crate::config::to_roi))?,
            masked: false,
        });
    }
    Ok(Geometry {
        object: ctx.cfg.object_bucket(w, h)?,
        reference: ctx.cfg.reference_roi(w, h),
        ref_bucket: ctx.cfg.reference_bucket(w, h)?,
        masked: true,
    })
}

fn regions(ctx: &Context, geo: &Geometry, bucket: &BucketSpec, image: &CorrelationImage) -> CliResult<RegionPair> {
    let guard = ctx.cfg.guard();
    let r = if geo.masked {
        RegionPair::from_bucket(geo.reference, bucket, guard)
    } else {
        RegionPair::from_threshold(image, guard)
    };
    r.map_err(CliError::metrology)
}

fn warn(image: &CorrelationImage) {
    for w in image.warnings() {
        match w {
            CorrWarning::ReferenceOverlapsObject => {
                eprintln!("warning: the DGI reference bucket overlaps the object footprint")
            }
        }
    }
    if !image.excluded_pixels().is_empty() {
        eprintln!(
            "warning: {} pixels with zero mean intensity were excluded",
            image.excluded_pixels().len()
        );
    }
}

pub fn simulate(ctx: &Context, output: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let sim = ctx.simulator()?;
    let cfg = &ctx.cfg;
    let n = cfg.run.n_frames;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => ctx.path("stack.spks")?,
    };
    let source = sim.source(n, cfg.run.master_seed);
    let mut writer = StackWriter::create(
        &path,
        cfg.sim.grid_width,
        cfg.sim.grid_height,
        cfg.run.light_kind,
        cfg.run.master_seed,
        None,
    )?;
    let mut total = 0.0;
    for start in (0..n).step_by(CHUNK_FRAMES) {
        let frames = map_frames(&source, start..(start + CHUNK_FRAMES).min(n), ctx.par, |_, f| {
            Ok(f.clone())
        })?;
        for f in &frames {
            total += f.mean();
            writer.push(f)?;
        }
    }
    writer.finish()?;
    println!(
        "wrote {}: {n} frames of {}x{}, mean intensity {:.6}, {:.2} s",
        path.display(),
        cfg.sim.grid_width,
        cfg.sim.grid_height,
        total / n as f64,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Serialize)]
struct LagRow {
    dx: isize,
    dy: isize,
    value: f64,
}

#[derive(Serialize)]
struct SectionRow {
    lag: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct ReportRow {
    quantity: &'static str,
    value: f64,
    uncertainty: f64,
    status: String,
}

fn report(quantity: &'static str, value: f64, uncertainty: f64, status: impl Into<String>) -> ReportRow {
    ReportRow {
        quantity,
        value,
        uncertainty,
        status: status.into(),
    }
}

pub fn characterize(ctx: &Context, stack: Option<&Path>) -> CliResult<()> {
    let input = ctx.input(stack)?;
    let (w, h) = (input.width(), input.height());
    let roi = ctx
        .cfg
        .analysis
        .autocorr_roi
        .map_or(Roi::full(w, h), crate::config::to_roi);
    let ac = spatial_autocorrelation(&input, roi, ctx.par)?;

    let map = &ac.map;
    let mut lags = Vec::new();
    for dy in -(map.max_dy as isize)..=map.max_dy as isize {
        for dx in -(map.max_dx as isize)..=map.max_dx as isize {
            lags.push(LagRow {
                dx,
                dy,
                value: map.get(dx, dy),
            });
        }
    }
    ctx.csv("autocorr_map.csv", &lags)?;
    let (sx, sy) = (map.section_x(), map.section_y());
    let section: Vec<SectionRow> = (0..sx.len().max(sy.len()))
        .map(|lag| SectionRow {
            lag,
            x: sx.get(lag).copied().unwrap_or(f64::NAN),
            y: sy.get(lag).copied().unwrap_or(f64::NAN),
        })
        .collect();
    ctx.csv("autocorr_section.csv", &section)?;

    let flags = if ac.flags.is_empty() {
        "ok".to_string()
    } else {
        ac.flags.iter().map(flag_name).collect::<Vec<_>>().join("|")
    };
    let mut rows = vec![
        report("peak", ac.peak_value, ac.peak_uncertainty, flags.clone()),
        report(
            "background",
            ac.background_value,
            ac.background_uncertainty,
            flags.clone(),
        ),
        report(
            "fwhm_x",
            ac.fwhm_x.unwrap_or(f64::NAN),
            ac.fwhm_x_uncertainty.unwrap_or(f64::NAN),
            flags.clone(),
        ),
        report(
            "fwhm_y",
            ac.fwhm_y.unwrap_or(f64::NAN),
            ac.fwhm_y_uncertainty.unwrap_or(f64::NAN),
            flags,
        ),
    ];

    let means = map_frames(&input, 0..input.len(), ctx.par, |_, f| Ok(f.mean()))?;
    rows.push(match fit_mode_count(&means) {
        Ok(fit) => report("mu_f_histogram", fit.mu_estimate, fit.std_error, "ok"),
        Err(e) => report("mu_f_histogram", f64::NAN, f64::NAN, format!("degenerate: {e}")),
    });

    let pixels: Vec<(usize, usize)> = if ctx.cfg.analysis.mode_pixels.is_empty() {
        vec![(roi.x + roi.width / 2, roi.y + roi.height / 2)]
    } else {
        ctx.cfg.analysis.mode_pixels.iter().map(|p| (p[0], p[1])).collect()
    };
    let fwhm = ac.fwhm().unwrap_or(ctx.cfg.sim.target_speckle_fwhm);
    match multi_pixel_correlation(&input, &pixels, fwhm, ctx.par) {
        Ok(mp) => {
            rows.push(report("bucket_peak", mp.peak, mp.peak_uncertainty, "ok"));
            rows.push(report(
                "bucket_background",
                mp.background,
                mp.background_uncertainty,
                "ok",
            ));
            for (name, fit) in [("mu_f_peak", mp.from_peak), ("mu_f_background", mp.from_background)] {
                let status = if fit.mu_estimate.is_finite() && fit.mu_estimate > 0.0 {
                    "ok"
                } else {
                    "degenerate: no excess correlation"
                };
                rows.push(report(name, fit.mu_estimate, fit.std_error, status));
            }
        }
        Err(e @ Error::PixelsTooClose { .. }) => return Err(e.into()),
        Err(e) => rows.push(report("mu_f_peak", f64::NAN, f64::NAN, format!("degenerate: {e}"))),
    }
    ctx.csv("characterize.csv", &rows)?;
    for r in &rows {
        println!(
            "{:<18} {:>12.6} ± {:<10.6} {}",
            r.quantity, r.value, r.uncertainty, r.status
        );
    }
    Ok(())
}

fn flag_name(f: &AutocorrFlag) -> &'static str {
    match f {
        AutocorrFlag::RoiTooSmall => "roi_too_small",
        AutocorrFlag::FwhmUndefined => "fwhm_undefined",
        AutocorrFlag::SubPixelSpeckle => "sub_pixel_speckle",
        AutocorrFlag::ShortBackground => "short_background",
    }
}

#[derive(Serialize)]
struct ProfileRow {
    x: usize,
    value: f64,
    smoothed: f64,
}

fn profile_rows(section: &SectionProfile) -> Vec<ProfileRow> {
    let s = smooth3(&section.values);
    section
        .positions
        .iter()
        .zip(&section.values)
        .zip(s)
        .map(|((&x, &value), smoothed)| ProfileRow { x, value, smoothed })
        .collect()
}

/// Rows of `object` as image rows, clipped to the image.
fn object_band(image: &CorrelationImage, object: Roi) -> Option<(usize, usize)> {
    let r = image.region();
    let y0 = object.y.max(r.y);
    let y1 = object.y_end().min(r.y_end());
    (y0 < y1).then(|| (y0 - r.y, y1 - r.y))
}

fn ratio_of(ctx: &Context, bucket: &BucketSpec) -> f64 {
    let fwhm = ctx.cfg.sim.target_speckle_fwhm;
    bucket.open_area() as f64 / (std::f64::consts::PI * (fwhm / 2.0).powi(2))
}

pub fn reconstruct(ctx: &Context, stack: Option<&Path>, technique: Technique) -> CliResult<()> {
    let input = ctx.input(stack)?;
    let geo = geometry(ctx, &input)?;
    let mut acc = CorrAccumulator::new(
        input.width(),
        input.height(),
        geo.reference,
        vec![geo.object.clone(), geo.ref_bucket.clone()],
    )?;
    acc.accumulate_source(&input, 0..input.len(), ctx.par)?;
    let selection = match technique {
        Technique::Gi => Selection::Gi { bucket: 0 },
        Technique::Dgi => Selection::Dgi { test: 0, reference: 1 },
    };
    let image = acc.finalize(selection)?;
    warn(&image);
    let name = technique.to_string().to_lowercase();
    ctx.image(&format!("{name}.pgm"), &image)?;
    if let Some((y0, y1)) = object_band(&image, geo.object.footprint()) {
        let section = SectionProfile::band(&image, 0, image.width(), y0, y1)?;
        ctx.csv(&format!("{name}_section.csv"), &profile_rows(&section))?;
    }
    let regions = regions(ctx, &geo, &geo.object, &image)?;
    let fom = snr(&image, &regions);
    let row = FomRow::from_outcome(technique, image.n_frames_used(), ratio_of(ctx, &geo.object), &fom);
    ctx.csv(&format!("{name}_fom.csv"), std::slice::from_ref(&row))?;
    let fom = fom.map_err(CliError::metrology)?;
    println!(
        "{technique}: N = {}, G_in = {:.6}, G_out = {:.6}, V = {:.4}, C = {:.4} ± {:.4}, SNR = {:.3} ± {:.3}{}",
        fom.n_frames,
        fom.g_in,
        fom.g_out,
        fom.visibility,
        fom.contrast,
        fom.contrast_err,
        fom.snr,
        fom.snr_err,
        if fom.snr_infinite {
            " (background has zero spread)"
        } else {
            ""
        }
    );
    Ok(())
}

fn report_rows(rows: &[FomRow]) -> CliResult<()> {
    for r in rows {
        println!(
            "{:<4} N = {:>7} A_b/A_sp = {:>8.3} C = {:.4} ± {:.4} SNR = {:>8.3} ± {:.3} {}",
            r.technique.to_string(),
            r.n_frames,
            r.a_ratio,
            r.contrast,
            r.contrast_err,
            r.snr,
            r.snr_err,
            r.status
        );
    }
    match rows.iter().find(|r| !r.is_ok()) {
        Some(r) => Err(CliError::new(
            EXIT_METROLOGY,
            format!(
                "{} of {} sweep rows failed, first: {}",
                rows.iter().filter(|r| !r.is_ok()).count(),
                rows.len(),
                r.status
            ),
        )),
        None => Ok(()),
    }
}

fn setup(ctx: &Context, input: &Input, geo: &Geometry) -> CliResult<SweepSetup> {
    if !geo.masked {
        return Err(CliError::new(
            crate::exit::EXIT_CONFIG,
            "sweeps place virtual objects and need analysis.bucket_roi for camera stacks",
        ));
    }
    Ok(SweepSetup {
        bucket_roi: ctx.cfg.bucket_roi(input.width(), input.height()),
        reference_roi: geo.reference,
        reference_bucket: geo.ref_bucket.clone(),
        guard: ctx.cfg.guard(),
        speckle_fwhm: ctx.cfg.sim.target_speckle_fwhm,
    })
}

pub fn sweep_sizes(ctx: &Context, stack: Option<&Path>) -> CliResult<()> {
    let input = ctx.input(stack)?;
    let geo = geometry(ctx, &input)?;
    let setup = setup(ctx, &input, &geo)?;
    let sizes: Vec<(usize, usize)> = ctx.cfg.analysis.sweep_sizes.iter().map(|s| (s[0], s[1])).collect();
    let rows = sweep_object_size(&input, &setup, &sizes, ctx.par)?;
    ctx.csv("sweep_size.csv", &rows)?;
    report_rows(&rows)
}

pub fn sweep_frames(ctx: &Context, stack: Option<&Path>) -> CliResult<()> {
    let input = ctx.input(stack)?;
    let geo = geometry(ctx, &input)?;
    let setup = setup(ctx, &input, &geo)?;
    let checkpoints = ctx.cfg.checkpoints(input.len());
    let rows = sweep_frame_count(&input, &setup, &geo.object, &checkpoints, ctx.par)?;
    ctx.csv("sweep_frames.csv", &rows)?;
    report_rows(&rows)
}

#[derive(Serialize)]
struct ResolutionRow {
    separation: usize,
    technique: Technique,
    n_frames: usize,
    r: f64,
    mean_max: f64,
    mean_min: f64,
    status: String,
}

pub fn resolution(ctx: &Context, stack: Option<&Path>) -> CliResult<()> {
    let input = ctx.input(stack)?;
    let (w, h) = (input.width(), input.height());
    let geo = geometry(ctx, &input)?;
    if !geo.masked {
        return Err(CliError::new(
            crate::exit::EXIT_CONFIG,
            "resolution places virtual slits and needs analysis.bucket_roi for camera stacks",
        ));
    }
    let seps = &ctx.cfg.analysis.slit_separations;
    let mut buckets = seps
        .iter()
        .map(|&s| ctx.cfg.multislit_bucket(s, w, h))
        .collect::<speckle_ghost::Result<Vec<_>>>()?;
    buckets.push(geo.ref_bucket.clone());
    let mut acc = CorrAccumulator::new(w, h, geo.reference, buckets.clone())?;
    acc.accumulate_source(&input, 0..input.len(), ctx.par)?;

    let mut rows = Vec::new();
    for (i, &sep) in seps.iter().enumerate() {
        let image = acc.finalize(Selection::Dgi {
            test: i,
            reference: seps.len(),
        })?;
        ctx.image(&format!("resolution_sep{sep}.pgm"), &image)?;
        let fp = buckets[i].footprint();
        let r = image.region();
        let margin = ctx.cfg.analysis.slit_width;
        let x0 = fp.x.saturating_sub(margin).max(r.x) - r.x;
        let x1 = (fp.x_end() + margin).min(r.x_end()).max(r.x) - r.x;
        let section = object_band(&image, fp)
            .ok_or(Error::Unresolved)
            .and_then(|(y0, y1)| SectionProfile::band(&image, x0, x1, y0, y1));
        let outcome = match section {
            Ok(section) => {
                ctx.csv(&format!("resolution_section_sep{sep}.csv"), &profile_rows(&section))?;
                resolution_r(&section, ctx.cfg.analysis.n_slits)
            }
            Err(e) => Err(e),
        };
        let row = match outcome {
            Ok(res) => ResolutionRow {
                separation: sep,
                technique: Technique::Dgi,
                n_frames: image.n_frames_used(),
                r: res.r,
                mean_max: res.mean_max,
                mean_min: res.mean_min,
                status: "ok".into(),
            },
            Err(e) => ResolutionRow {
                separation: sep,
                technique: Technique::Dgi,
                n_frames: image.n_frames_used(),
                r: f64::NAN,
                mean_max: f64::NAN,
                mean_min: f64::NAN,
                status: e.to_string(),
            },
        };
        println!("separation {sep} px: R = {:.4} {}", row.r, row.status);
        rows.push(row);
    }
    ctx.csv("resolution.csv", &rows)?;
    if rows.iter().any(|r| r.status != "ok") {
        return Err(CliError::new(EXIT_METROLOGY, "some sections are unresolved"));
    }
    Ok(())
}

pub fn ingest(dir: &Path, output: &Path, layout: Option<ArmLayout>) -> CliResult<()> {
    let start = Instant::now();
    let n = ingest_to_file(dir, layout, output)?;
    println!(
        "wrote {}: {n} frames ({}), {:.2} s",
        output.display(),
        LightKind::Ingested,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn export(stack: &Path, index: usize, output: &Path, scaling: Scaling) -> CliResult<()> {
    let reader = StackReader::open(stack)?;
    let mut frame = Frame::zeros(reader.width(), reader.height());
    reader.load(index, &mut frame)?;
    export_image(&frame, output, scaling)?;
    println!("wrote {} (frame {index})", output.display());
    Ok(())
}
