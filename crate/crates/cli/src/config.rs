//! Experiment configuration: one TOML file with `sim.`, `run.`, `analysis.`
//! and `output.` keys, layered over built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speckle_ghost::gi::BucketSpec;
use speckle_ghost::masks::{multi_slit_mask, slit_mask, ObjectMask};
use speckle_ghost::speckle::SimConfig;
use speckle_ghost::{Error, LightKind, Result, Roi};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub run: RunConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_frames: usize,
    pub master_seed: u64,
    pub light_kind: LightKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Slit,
    Multislit,
    Mask,
}

/// Rectangles are `[x, y, width, height]` in frame pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Region of the frame holding the object. Defaults to the whole frame.
    pub bucket_roi: Option<[usize; 4]>,
    /// Region over which correlation images are formed. Defaults to the whole frame.
    pub reference_roi: Option<[usize; 4]>,
    /// Open bucket subtracted in DGI. Defaults to the whole frame.
    pub ref_bucket_roi: Option<[usize; 4]>,
    pub object: ObjectKind,
    pub object_width: usize,
    pub object_height: usize,
    /// Graymap used when `object = "mask"`.
    pub object_mask: Option<PathBuf>,
    /// Offset of the object inside the bucket region. Defaults to centred.
    pub object_offset: Option<[usize; 2]>,
    pub n_slits: usize,
    pub slit_width: usize,
    pub slit_height: usize,
    /// Gap used by `object = "multislit"`.
    pub slit_separation: usize,
    /// Gaps covered by the `resolution` command.
    pub slit_separations: Vec<usize>,
    /// Background pixels lie further than this from the object. Defaults to
    /// twice the speckle FWHM, rounded up.
    pub background_guard: Option<usize>,
    /// Region analysed by `characterize`. Defaults to the whole frame.
    pub autocorr_roi: Option<[usize; 4]>,
    /// Bucket pixels `[x, y]` of the multi-pixel correlation. Defaults to the frame centre.
    pub mode_pixels: Vec<[usize; 2]>,
    /// Frame counts of the frame-count sweep. Defaults to a 1-2-5 ladder.
    pub checkpoints: Vec<usize>,
    /// Object sizes `[width, height]` of the size sweep.
    pub sweep_sizes: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl ExperimentConfig {
    /// Built-in defaults: a 128x128 grid and 2x10^4 frames, or a 200x200
    /// grid and 10^5 frames with `paper_scale`.
    pub fn defaults(paper_scale: bool) -> Self {
        let (sim, n_frames, object) = if paper_scale {
            (SimConfig::default(), 100_000, (20, 50))
        } else {
            (SimConfig::desk(), 20_000, (10, 25))
        };
        ExperimentConfig {
            sim,
            run: RunConfig {
                n_frames,
                master_seed: 1,
                light_kind: LightKind::Superthermal,
            },
            analysis: AnalysisConfig {
                bucket_roi: None,
                reference_roi: None,
                ref_bucket_roi: None,
                object: ObjectKind::Slit,
                object_width: object.0,
                object_height: object.1,
                object_mask: None,
                object_offset: None,
                n_slits: 3,
                slit_width: 10,
                slit_height: 40,
                slit_separation: 2,
                slit_separations: vec![1, 2, 3, 4],
                background_guard: None,
                autocorr_roi: None,
                mode_pixels: Vec::new(),
                checkpoints: Vec::new(),
                sweep_sizes: vec![[2, 2], [4, 4], [6, 10], [10, 25], [20, 50]],
            },
            output: OutputConfig {
                directory: PathBuf::from("out"),
                formats: vec![OutputFormat::Csv, OutputFormat::Pgm],
            },
        }
    }

    /// Parses `text` over the defaults; keys absent from `text` keep their
    /// default values.
    pub fn from_toml(text: &str, paper_scale: bool) -> Result<Self> {
        let overrides: toml::Table = text.parse().map_err(|e| Error::Config(format!("config: {e}")))?;
        let mut base = toml::Table::try_from(Self::defaults(paper_scale)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overrides);
        let cfg: ExperimentConfig = base.try_into().map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, paper_scale: bool) -> Result<Self> {
        match path {
            None => Ok(Self::defaults(paper_scale)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                Self::from_toml(&text, paper_scale)
            }
        }
    }

    /// Checks the run and analysis blocks against a
    /// `width`x`height` frame.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.run.n_frames < 2 {
            return Err(Error::Config(format!(
                "run.n_frames must be >= 2, got {}",
                self.run.n_frames
            )));
        }
        for (name, r) in [
            ("analysis.bucket_roi", self.analysis.bucket_roi),
            ("analysis.reference_roi", self.analysis.reference_roi),
            ("analysis.ref_bucket_roi", self.analysis.ref_bucket_roi),
            ("analysis.autocorr_roi", self.analysis.autocorr_roi),
        ] {
            if let Some(r) = r {
                let roi = to_roi(r);
                if roi.area() == 0 {
                    return Err(Error::Config(format!("{name} is empty")));
                }
                roi.check_within("configured region", width, height)
                    .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        for &[x, y] in &self.analysis.mode_pixels {
            if x >= width || y >= height {
                return Err(Error::Config(format!(
                    "analysis.mode_pixels: ({x}, {y}) is outside the frame"
                )));
            }
        }
        if self.analysis.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("analysis.checkpoints must be strictly ascending".into()));
        }
        if self.analysis.slit_separations.is_empty() {
            return Err(Error::Config("analysis.slit_separations must not be empty".into()));
        }
        Ok(())
    }

    pub fn bucket_roi(&self, width: usize, height: usize) -> Roi {
        self.analysis.bucket_roi.map_or(Roi::full(width, height), to_roi)
    }

    pub fn reference_roi(&self, width: usize, height: usize) -> Roi {
        self.analysis.reference_roi.map_or(Roi::full(width, height), to_roi)
    }

    pub fn reference_bucket(&self, width: usize, height: usize) -> Result<BucketSpec> {
        BucketSpec::open(self.analysis.ref_bucket_roi.map_or(Roi::full(width, height), to_roi))
    }

    pub fn guard(&self) -> usize {
        self.analysis
            .background_guard
            .unwrap_or((2.0 * self.sim.target_speckle_fwhm).ceil() as usize)
    }

    /// The configured object placed in the bucket region.
    pub fn object_bucket(&self, width: usize, height: usize) -> Result<BucketSpec> {
        let a = &self.analysis;
        let mask = match a.object {
            ObjectKind::Slit => slit_mask(a.object_width, a.object_height)?,
            ObjectKind::Multislit => multi_slit_mask(a.n_slits, a.slit_width, a.slit_height, a.slit_separation)?,
            ObjectKind::Mask => {
                let path = a
                    .object_mask
                    .as_ref()
                    .ok_or_else(|| Error::Config("analysis.object = \"mask\" needs analysis.object_mask".into()))?;
                speckle_ghost::io::read_mask(path)?
            }
        };
        self.place(mask, width, height)
    }

    /// A multi-slit object with the given gap, placed like the configured object.
    pub fn multislit_bucket(&self, separation: usize, width: usize, height: usize) -> Result<BucketSpec> {
        let a = &self.analysis;
        let mask = multi_slit_mask(a.n_slits, a.slit_width, a.slit_height, separation)?;
        self.place(mask, width, height)
    }

    fn place(&self, mask: ObjectMask, width: usize, height: usize) -> Result<BucketSpec> {
        let roi = self.bucket_roi(width, height);
        if mask.width() > roi.width || mask.height() > roi.height {
            return Err(Error::Config(format!(
                "a {}x{} object does not fit the {}x{} bucket region",
                mask.width(),
                mask.height(),
                roi.width,
                roi.height
            )));
        }
        let [ox, oy] = self
            .analysis
            .object_offset
            .unwrap_or([(roi.width - mask.width()) / 2, (roi.height - mask.height()) / 2]);
        BucketSpec::new(roi, Some(mask.placed_at(ox, oy)))
    }

    /// Configured checkpoints, or 2, 5, 10, 20, 50, ... up to `n_frames`.
    pub fn checkpoints(&self, n_frames: usize) -> Vec<usize> {
        if !self.analysis.checkpoints.is_empty() {
            return self.analysis.checkpoints.clone();
        }
        let mut out = Vec::new();
        let mut decade = 1;
        'outer: loop {
            for m in [2, 5, 10] {
                let n = m * decade;
                if n >= n_frames {
                    break 'outer;
                }
                out.push(n);
            }
            decade *= 10;
        }
        out.push(n_frames);
        out
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }
}

pub fn to_roi(r: [usize; 4]) -> Roi {
    Roi::new(r[0], r[1], r[2], r[3])
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_override_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "sim.grid_width = 64\nsim.pinhole_mode_count = inf\nrun.light_kind = \"thermal\"\nanalysis.bucket_roi = [1, 2, 30, 40]\n",
            false,
        )
        .unwrap();
        assert_eq!(cfg.sim.grid_width, 64);
        assert_eq!(cfg.sim.grid_height, 128);
        assert!(cfg.sim.pinhole_mode_count.is_infinite());
        assert_eq!(cfg.run.light_kind, LightKind::Thermal);
        assert_eq!(cfg.run.n_frames, 20_000);
        assert_eq!(cfg.bucket_roi(64, 128), Roi::new(1, 2, 30, 40));
    }

    #[test]
    fn unknown_keys_and_bad_regions_fail() {
        assert!(ExperimentConfig::from_toml("sim.grid_wdth = 3", false).is_err());
        assert!(ExperimentConfig::from_toml("colour = 3", false).is_err());
        let cfg = ExperimentConfig::from_toml("analysis.reference_roi = [100, 0, 50, 10]", false).unwrap();
        assert!(cfg.validate(128, 128).is_err());
        let cfg = ExperimentConfig::from_toml("analysis.checkpoints = [10, 5]", false).unwrap();
        assert!(cfg.validate(128, 128).is_err());
    }

    #[test]
    fn paper_scale_defaults() {
        let cfg = ExperimentConfig::defaults(true);
        assert_eq!((cfg.sim.grid_width, cfg.run.n_frames), (200, 100_000));
        assert_eq!((cfg.analysis.object_width, cfg.analysis.object_height), (20, 50));
    }

    #[test]
    fn checkpoint_ladder() {
        let cfg = ExperimentConfig::defaults(false);
        assert_eq!(
            cfg.checkpoints(20_000),
            vec![2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000, 20_000]
        );
        assert_eq!(cfg.checkpoints(2), vec![2]);
        assert_eq!(cfg.checkpoints(7), vec![2, 5, 7]);
    }

    #[test]
    fn object_is_centred() {
        let cfg = ExperimentConfig::defaults(false);
        let b = cfg.object_bucket(128, 128).unwrap();
        assert_eq!(b.footprint(), Roi::new(59, 51, 10, 25));
        let m = cfg.multislit_bucket(4, 128, 128).unwrap();
        assert_eq!(m.footprint().width, 38);
    }
}
