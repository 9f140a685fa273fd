//! Synthetic moving-blob clips: one Gaussian blob translating at constant
//! velocity over a flat background.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Video};
use crate::vten;

pub const BACKGROUND: f64 = 0.1;
pub const AMPLITUDE: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    /// Unit `(dx, dy)` in image coordinates (y grows downwards).
    pub fn unit(self) -> (f64, f64) {
        match self {
            Direction::Left => (-1.0, 0.0),
            Direction::Right => (1.0, 0.0),
            Direction::Up => (0.0, -1.0),
            Direction::Down => (0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub classes: Vec<Direction>,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Standard deviation of the blob in pixels; it is considered to extend
    /// `2.5 · sigma` from its centre.
    pub object_sigma: f64,
    /// Pixels per frame.
    pub speed: f64,
    /// Uniform per-pixel noise in `[−noise, noise]`.
    pub noise: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: Direction::ALL.to_vec(),
            frames: 6,
            height: 16,
            width: 16,
            channels: 1,
            object_sigma: 2.0,
            speed: 1.0,
            noise: 0.0,
            samples: 400,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn extent(&self) -> f64 {
        2.5 * self.object_sigma
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        if self.frames < 2 || self.height < 3 || self.width < 3 || self.channels == 0 {
            return bad(format!(
                "need ≥2 frames of at least 3x3 with ≥1 channel, got {}x{}x{}x{}",
                self.frames, self.height, self.width, self.channels
            ));
        }
        if !(self.object_sigma > 0.0 && self.object_sigma.is_finite()) {
            return bad(format!("object sigma {} must be positive", self.object_sigma));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad(format!("speed {} must be non-negative", self.speed));
        }
        if !(0.0..0.1).contains(&self.noise) {
            return bad(format!("noise amplitude {} must be in [0, 0.1)", self.noise));
        }
        let travel = self.speed * (self.frames - 1) as f64;
        let span = 2.0 * self.extent();
        for d in &self.classes {
            let (dx, _) = d.unit();
            let (room, axis) = if dx != 0.0 { (self.width, "width") } else { (self.height, "height") };
            if span + travel > (room - 1) as f64 {
                return bad(format!(
                    "class {}: object of extent {} moving {travel} px does not stay within {axis} {room}",
                    d.name(),
                    self.extent()
                ));
            }
        }
        let cross = (self.height.min(self.width) - 1) as f64;
        if span > cross {
            return bad(format!("object of extent {} does not fit the frame", self.extent()));
        }
        Ok(())
    }

    /// Draw sample `index` (class `index mod classes`).
    pub fn sample(&self, index: usize) -> Result<(Video, usize)> {
        self.validate()?;
        let label = index % self.classes.len();
        let dir = self.classes[label];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let (dx, dy) = dir.unit();
        let (vx, vy) = (dx * self.speed, dy * self.speed);
        let travel = self.speed * (self.frames - 1) as f64;
        let e = self.extent();
        let start = |room: usize, moving: f64, rng: &mut ChaCha8Rng| {
            let hi = (room - 1) as f64 - e;
            let (lo, hi) = match moving {
                m if m > 0.0 => (e, hi - travel),
                m if m < 0.0 => (e + travel, hi),
                _ => (e, hi),
            };
            if hi > lo { rng.random_range(lo..=hi) } else { lo }
        };
        let cx = start(self.width, vx, &mut rng);
        let cy = start(self.height, vy, &mut rng);
        let clip = blob_clip(self.frames, self.height, self.width, self.channels, self.object_sigma, (cx, cy), (vx, vy))?;
        let video = if self.noise > 0.0 {
            let noisy: Vec<f64> = clip
                .tensor()
                .values()
                .iter()
                .map(|&x| x + rng.random_range(-self.noise..=self.noise))
                .collect();
            clip.with_values_clamped(noisy)?
        } else {
            clip
        };
        Ok((video, label))
    }
}

/// Clip of a blob centred at `start + t · velocity` in frame `t`.
pub fn blob_clip(
    frames: usize,
    h: usize,
    w: usize,
    channels: usize,
    sigma: f64,
    start: (f64, f64),
    velocity: (f64, f64),
) -> Result<Video> {
    let mut values = Vec::with_capacity(frames * h * w * channels);
    for t in 0..frames {
        let (cx, cy) = (start.0 + velocity.0 * t as f64, start.1 + velocity.1 * t as f64);
        for y in 0..h {
            for x in 0..w {
                let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let v = BACKGROUND + AMPLITUDE * (-r2 / (2.0 * sigma * sigma)).exp();
                values.extend(std::iter::repeat_n(v, channels));
            }
        }
    }
    Video::new(Tensor::new(vec![frames, h, w, channels], values)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: usize,
    pub class: String,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n")
        .collect()
}

/// Parse a JSON-lines manifest; blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed {
                format: "manifest",
                detail: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Write every sample as VTEN plus `manifest.jsonl` into `out_dir`.
pub fn write_dataset(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let (video, label) = spec.sample(i)?;
        let name = format!("clip_{i:05}.vten");
        vten::write_video(out_dir.join(&name), &video)?;
        entries.push(ManifestEntry { path: name, label, class: spec.classes[label].name().to_string() });
    }
    fs::write(out_dir.join(MANIFEST_NAME), format_manifest(&entries))?;
    Ok(entries)
}

/// Entries of a manifest file with paths resolved against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, ManifestEntry)>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&fs::read_to_string(path)?)?
        .into_iter()
        .map(|e| (base.join(&e.path), e))
        .collect())
}
