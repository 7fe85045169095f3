//! Whole stacks: per-frame seeding, streaming generation and in-memory
//! assembly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSource, FrameStack, LightKind};
use crate::pipeline::Parallelism;
use crate::rng::substream;
use crate::speckle::compound::CompoundModel;
use crate::speckle::config::{Backend, SimConfig};
use crate::speckle::physical::PhysicalModel;
use crate::speckle::thermal::SpeckleKernel;

#[derive(Debug, Clone)]
enum Model {
    Thermal(SpeckleKernel, f64),
    Compound(CompoundModel),
    Physical(Box<PhysicalModel>),
}

/// Calibrated frame generator for one configuration and light kind.
#[derive(Debug, Clone)]
pub struct SpeckleSimulator {
    config: SimConfig,
    light_kind: LightKind,
    model: Model,
}

impl SpeckleSimulator {
    pub fn new(config: &SimConfig, light_kind: LightKind) -> Result<Self> {
        config.validate()?;
        let model = match (light_kind, config.backend) {
            (LightKind::Thermal, _) => Model::Thermal(
                SpeckleKernel::for_fwhm(config.grid_width, config.grid_height, config.target_speckle_fwhm)?,
                config.mean_intensity,
            ),
            (LightKind::Superthermal, Backend::Compound) => Model::Compound(CompoundModel::new(config)?),
            (LightKind::Superthermal, Backend::Physical) => Model::Physical(Box::new(PhysicalModel::new(config)?)),
            (LightKind::Ingested, _) => return Err(Error::Config("ingested stacks cannot be simulated".into())),
        };
        Ok(SpeckleSimulator {
            config: config.clone(),
            light_kind,
            model,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn light_kind(&self) -> LightKind {
        self.light_kind
    }

    /// Frame `index` of the stack seeded by `master_seed`.
    pub fn frame(&self, master_seed: u64, index: usize) -> Frame {
        let mut rng = substream(master_seed, index as u64);
        match &self.model {
            Model::Thermal(kernel, mean) => kernel.draw_intensity(&mut rng, *mean),
            Model::Compound(m) => m.frame(&mut rng),
            Model::Physical(m) => m.frame(&mut rng),
        }
    }

    /// A lazily generated stack of `n_frames` frames.
    pub fn source(&self, n_frames: usize, master_seed: u64) -> SimulatedStack<'_> {
        SimulatedStack {
            sim: self,
            n_frames,
            master_seed,
        }
    }
}

/// Frames produced on demand; never resident in memory as a whole.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedStack<'a> {
    sim: &'a SpeckleSimulator,
    n_frames: usize,
    master_seed: u64,
}

impl SimulatedStack<'_> {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn light_kind(&self) -> LightKind {
        self.sim.light_kind
    }
}

impl FrameSource for SimulatedStack<'_> {
    fn width(&self) -> usize {
        self.sim.config.grid_width
    }

    fn height(&self) -> usize {
        self.sim.config.grid_height
    }

    fn len(&self) -> usize {
        self.n_frames
    }

    fn load(&self, index: usize, buf: &mut Frame) -> Result<()> {
        if index >= self.n_frames {
            return Err(crate::error::FormatError::FrameIndex {
                index,
                count: self.n_frames,
            }
            .into());
        }
        *buf = self.sim.frame(self.master_seed, index);
        Ok(())
    }
}

/// Generates a whole stack in memory.
///
/// Allocation failure is reported with the number of frames already stored.
pub fn gen_stack(
    config: &SimConfig,
    n_frames: usize,
    master_seed: u64,
    light_kind: LightKind,
    par: Parallelism,
) -> Result<FrameStack> {
    if n_frames == 0 {
        return Err(Error::Config("n_frames must be >= 1".into()));
    }
    let sim = SpeckleSimulator::new(config, light_kind)?;
    let mut frames: Vec<Frame> = Vec::new();
    frames
        .try_reserve_exact(n_frames)
        .map_err(|_| Error::ResourceExhausted { frame_index: 0 })?;
    const BATCH: usize = 256;
    for start in (0..n_frames).step_by(BATCH) {
        let end = (start + BATCH).min(n_frames);
        let batch: Vec<Frame> = par.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| sim.frame(master_seed, i))
                .collect()
        })?;
        frames.extend(batch);
    }
    FrameStack::new(config.grid_width, config.grid_height, frames, master_seed, light_kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SimConfig {
        SimConfig {
            grid_width: 16,
            grid_height: 12,
            target_speckle_fwhm: 2.5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn single_frame_matches_substream_zero() {
        let stack = gen_stack(&tiny(), 1, 42, LightKind::Superthermal, Parallelism::serial()).unwrap();
        let sim = SpeckleSimulator::new(&tiny(), LightKind::Superthermal).unwrap();
        assert_eq!(stack.frames()[0], sim.frame(42, 0));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let a = gen_stack(&tiny(), 300, 7, LightKind::Thermal, Parallelism::serial()).unwrap();
        let b = gen_stack(&tiny(), 300, 7, LightKind::Thermal, Parallelism::workers(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lazy_source_matches_stack() {
        let stack = gen_stack(&tiny(), 5, 3, LightKind::Superthermal, Parallelism::serial()).unwrap();
        let sim = SpeckleSimulator::new(&tiny(), LightKind::Superthermal).unwrap();
        let src = sim.source(5, 3);
        let mut buf = Frame::zeros(1, 1);
        for i in 0..5 {
            src.load(i, &mut buf).unwrap();
            assert_eq!(buf, stack.frames()[i]);
        }
        assert!(src.load(5, &mut buf).is_err());
    }

    #[test]
    fn rejects_empty_and_ingested() {
        assert!(gen_stack(&tiny(), 0, 0, LightKind::Thermal, Parallelism::serial()).is_err());
        assert!(SpeckleSimulator::new(&tiny(), LightKind::Ingested).is_err());
    }
}
