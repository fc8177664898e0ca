//! Noise schedules, the forward process, and reverse-process samplers.

mod guidance;
mod process;
mod sampler;
mod schedule;

pub use guidance::{apply_cfg, rescale_guidance};
pub use process::{ancestral_update, diffuse_once, Parameterization};
pub use sampler::{sample, sample_batch, Denoiser, SamplerConfig, SamplerKind};
pub use schedule::{NoiseSchedule, ScheduleFile, ScheduleShape};
