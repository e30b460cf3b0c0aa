//! JSON-facing mirrors of the library's generator spec and tracker config.
//! Unknown keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use adatrack::geometry::BBox;
use adatrack::synth;
use adatrack::tracker::{Mode, TrackerConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub texture: TextureSpec,
    #[serde(default)]
    pub motion: MotionSpec,
    #[serde(default)]
    pub deform: DeformSpec,
    #[serde(default)]
    pub illumination: IlluminationSpec,
    #[serde(default)]
    pub occluder: Option<OccluderSpec>,
    /// `[x, y, w, h]` in pixels.
    pub init_box: [f32; 4],
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureSpec {
    Perlin { octaves: usize, base_period: f32 },
    Checker { period: f32 },
    File(PathBuf),
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec::Perlin { octaves: 4, base_period: 48.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    #[serde(default)]
    pub shift: [f32; 2],
    #[serde(default)]
    pub shift_turn_deg: f32,
    #[serde(default = "one")]
    pub zoom: f32,
    #[serde(default)]
    pub rot_deg: f32,
}

fn one() -> f32 {
    1.0
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec { shift: [0.0, 0.0], shift_turn_deg: 0.0, zoom: 1.0, rot_deg: 0.0 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformSpec {
    #[default]
    None,
    Sinusoid { amplitude: f32, spatial_period: f32, temporal_period: f32 },
    ThinPlate { points: usize, drift: f32 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationSpec {
    #[serde(default)]
    pub gain_per_frame: f32,
    #[serde(default)]
    pub bias_per_frame: f32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderSpec {
    pub shape: ShapeSpec,
    pub size: f32,
    pub entry_frame: usize,
    pub velocity: [f32; 2],
    #[serde(default)]
    pub start: Option<[f32; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeSpec {
    Square,
    Disc,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read spec file {}", path.display()))?;
        let spec: SpecFile = serde_json::from_str(&text)
            .with_context(|| format!("invalid spec file {}", path.display()))?;
        Ok(spec)
    }

    pub fn into_synth_spec(self, seed_override: Option<u64>) -> Result<synth::SynthSpec<f32>> {
        let texture = match self.texture {
            TextureSpec::Perlin { octaves, base_period } => {
                synth::Texture::Perlin { octaves, base_period }
            }
            TextureSpec::Checker { period } => synth::Texture::Checker { period },
            TextureSpec::File(path) => {
                let img = crate::io::load_gray(&path)?;
                synth::Texture::Image(img)
            }
        };
        let deform = match self.deform {
            DeformSpec::None => synth::Deform::None,
            DeformSpec::Sinusoid { amplitude, spatial_period, temporal_period } => {
                synth::Deform::Sinusoid { amplitude, spatial_period, temporal_period }
            }
            DeformSpec::ThinPlate { points, drift } => synth::Deform::ThinPlate { points, drift },
        };
        let occluder = self.occluder.map(|o| synth::Occluder {
            shape: match o.shape {
                ShapeSpec::Square => synth::SpriteShape::Square,
                ShapeSpec::Disc => synth::SpriteShape::Disc,
            },
            size: o.size,
            entry_frame: o.entry_frame,
            velocity: (o.velocity[0], o.velocity[1]),
            start: o.start.map(|s| (s[0], s[1])),
        });
        let [x, y, w, h] = self.init_box;
        if w <= 0.0 || h <= 0.0 {
            bail!("init_box extents must be positive");
        }
        Ok(synth::SynthSpec {
            seed: seed_override.unwrap_or(self.seed),
            frames: self.frames,
            width: self.width,
            height: self.height,
            texture,
            motion: synth::Motion {
                shift: (self.motion.shift[0], self.motion.shift[1]),
                shift_turn_deg: self.motion.shift_turn_deg,
                zoom: self.motion.zoom,
                rot_deg: self.motion.rot_deg,
            },
            deform,
            illumination: synth::Illumination {
                gain_per_frame: self.illumination.gain_per_frame,
                bias_per_frame: self.illumination.bias_per_frame,
            },
            occluder,
            init_box: BBox::new(x, y, w, h),
        })
    }
}

/// Flat JSON object with exactly the tracker config field names; unknown
/// keys are an error. Missing fields keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha: Option<f32>,
    pub beta: Option<f32>,
    pub flow_iters: Option<usize>,
    pub match_iters: Option<usize>,
    pub feature_channels: Option<usize>,
    pub mode: Option<String>,
    pub search_factor: Option<f32>,
    pub roi_factor: Option<f32>,
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "inter_frame_only" => Ok(Mode::InterFrameOnly),
        "template_only" => Ok(Mode::TemplateOnly),
        "full" => Ok(Mode::Full),
        other => bail!("unknown mode {other:?} (expected inter_frame_only, template_only or full)"),
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply(&self, base: &mut TrackerConfig<f32>) -> Result<()> {
        if let Some(v) = self.alpha {
            base.alpha = v;
        }
        if let Some(v) = self.beta {
            base.beta = v;
        }
        if let Some(v) = self.flow_iters {
            base.flow_iters = v;
        }
        if let Some(v) = self.match_iters {
            base.match_iters = v;
        }
        if let Some(v) = self.feature_channels {
            base.feature_channels = v;
        }
        if let Some(m) = &self.mode {
            base.mode = parse_mode(m)?;
        }
        if let Some(v) = self.search_factor {
            base.search_factor = v;
        }
        if let Some(v) = self.roi_factor {
            base.roi_factor = v;
        }
        Ok(())
    }
}
