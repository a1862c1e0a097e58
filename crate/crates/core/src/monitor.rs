//! Query-conditioned perception, one monitor per camera.
//!
//! Raster frames go to a vision-language backend together with the
//! controller's question; frames from low-resolution cameras are cropped
//! and upscaled first. Symbolic frames (simulation) can be answered either by
//! a backend, from a text caption, or by [`oracle_describe`], a fixed-template
//! stand-in for the model.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::VisualQuery;
use crate::llm::{self, BackendError, ChatBackend, ChatMessage};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("upscale target {target:?} is smaller than source {source_dims:?}")]
    InvalidTarget { source_dims: (u32, u32), target: (u32, u32) },
    #[error("crop rectangle {0:?} lies outside the image")]
    InvalidCrop(CropRect),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameBearing {
    Left,
    Center,
    Right,
}

impl FrameBearing {
    pub fn name(self) -> &'static str {
        match self {
            FrameBearing::Left => "left",
            FrameBearing::Center => "center",
            FrameBearing::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApparentSize {
    Small,
    Medium,
    Large,
}

impl ApparentSize {
    pub fn name(self) -> &'static str {
        match self {
            ApparentSize::Small => "small",
            ApparentSize::Medium => "medium",
            ApparentSize::Large => "large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEntity {
    pub label: String,
    pub bearing_in_frame: FrameBearing,
    pub apparent_size: ApparentSize,
    #[serde(default)]
    pub occluded: bool,
}

/// PNG-encoded image with its dimensions.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    #[serde(with = "png_b64")]
    pub png: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{}, {} bytes)", self.width, self.height, self.png.len())
    }
}

mod png_b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        STANDARD.decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Raster {
    pub fn encode(img: &RgbImage) -> Result<Self, MonitorError> {
        let mut png = Vec::new();
        img.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)?;
        Ok(Raster { width: img.width(), height: img.height(), png })
    }

    pub fn decode(&self) -> Result<RgbImage, MonitorError> {
        Ok(image::load_from_memory_with_format(&self.png, ImageFormat::Png)?.to_rgb8())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameContent {
    Raster(Raster),
    Symbolic(Vec<SceneEntity>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub camera_id: String,
    pub content: FrameContent,
    pub timestamp: u32,
}

impl CameraFrame {
    pub fn symbolic(camera_id: impl Into<String>, entities: Vec<SceneEntity>, timestamp: u32) -> Self {
        CameraFrame { camera_id: camera_id.into(), content: FrameContent::Symbolic(entities), timestamp }
    }

    pub fn raster(camera_id: impl Into<String>, raster: Raster, timestamp: u32) -> Self {
        CameraFrame { camera_id: camera_id.into(), content: FrameContent::Raster(raster), timestamp }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorObservation {
    pub camera_id: String,
    pub text: String,
}

/// Resampling strategy used to enlarge low-resolution frames.
pub trait Upscaler: Send + Sync {
    fn resize(&self, img: &RgbImage, width: u32, height: u32) -> RgbImage;
}

/// Bilinear interpolation with pixel-centre alignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct BilinearUpscaler;

impl Upscaler for BilinearUpscaler {
    fn resize(&self, img: &RgbImage, width: u32, height: u32) -> RgbImage {
        let (sw, sh) = img.dimensions();
        let map = |dst: u32, src_len: u32, dst_len: u32| -> (u32, u32, f64) {
            let x = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
            let x0 = x.floor() as u32;
            let x1 = (x0 + 1).min(src_len - 1);
            (x0, x1, x - x0 as f64)
        };
        let cols: Vec<_> = (0..width).map(|i| map(i, sw, width)).collect();
        let rows: Vec<_> = (0..height).map(|j| map(j, sh, height)).collect();
        RgbImage::from_fn(width, height, |i, j| {
            let (x0, x1, fx) = cols[i as usize];
            let (y0, y1, fy) = rows[j as usize];
            let mut out = [0u8; 3];
            for (c, o) in out.iter_mut().enumerate() {
                let p = |x, y| img.get_pixel(x, y).0[c] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                *o = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
            }
            Rgb(out)
        })
    }
}

/// Resizes `image` to `target` with `upscaler`. Shrinking is rejected.
pub fn upscale_with(upscaler: &dyn Upscaler, image: &Raster, target: (u32, u32)) -> Result<Raster, MonitorError> {
    if target.0 < image.width || target.1 < image.height {
        return Err(MonitorError::InvalidTarget { source_dims: (image.width, image.height), target });
    }
    let decoded = image.decode()?;
    Raster::encode(&upscaler.resize(&decoded, target.0, target.1))
}

pub fn upscale(image: &Raster, target: (u32, u32)) -> Result<Raster, MonitorError> {
    upscale_with(&BilinearUpscaler, image, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl CropRect {
    /// A `width`x`height` window from the top of a frame, horizontally centred.
    pub fn top_centered(frame_width: u32, width: u32, height: u32) -> Self {
        CropRect { x: frame_width.saturating_sub(width) / 2, y: 0, width, height }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Frames whose smaller side is below this are upscaled.
    pub upscale_threshold: u32,
    pub upscale_target: (u32, u32),
    #[serde(default)]
    pub crops: BTreeMap<String, CropRect>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { upscale_threshold: 512, upscale_target: (768, 768), crops: BTreeMap::new() }
    }
}

pub struct Monitor {
    config: MonitorConfig,
    upscaler: Arc<dyn Upscaler>,
    upscale_count: AtomicUsize,
}

impl Default for Monitor {
    fn default() -> Self {
        Monitor::new(MonitorConfig::default())
    }
}

fn monitor_system_text(camera_id: &str) -> String {
    format!(
        "You are the visual monitor for the robot's `{camera_id}` camera. \
         Answer the controller's question about the current view in one or two plain sentences. \
         Say whether the asked-about object is visible, where it is in the frame \
         (left, center or right) and how large it appears. If it is not visible, say so and \
         briefly list what is visible instead."
    )
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        Monitor { config, upscaler: Arc::new(BilinearUpscaler), upscale_count: AtomicUsize::new(0) }
    }

    pub fn with_upscaler(mut self, upscaler: Arc<dyn Upscaler>) -> Self {
        self.upscaler = upscaler;
        self
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    /// Number of frames routed through the upscaler so far.
    pub fn upscale_count(&self) -> usize {
        self.upscale_count.load(Ordering::SeqCst)
    }

    /// Applies the camera's crop, then upscales if the frame is low-resolution.
    pub fn prepare_raster(&self, camera_id: &str, raster: &Raster) -> Result<Raster, MonitorError> {
        let mut current = raster.clone();
        if let Some(crop) = self.config.crops.get(camera_id) {
            if crop.x + crop.width > raster.width || crop.y + crop.height > raster.height {
                return Err(MonitorError::InvalidCrop(*crop));
            }
            let img = raster.decode()?;
            let sub = image::imageops::crop_imm(&img, crop.x, crop.y, crop.width, crop.height).to_image();
            current = Raster::encode(&sub)?;
        }
        if current.width.min(current.height) < self.config.upscale_threshold {
            self.upscale_count.fetch_add(1, Ordering::SeqCst);
            current = upscale_with(&*self.upscaler, &current, self.config.upscale_target)?;
        }
        Ok(current)
    }

    /// Asks `backend` the controller's question about one camera frame.
    pub fn describe_scene(
        &self,
        frame: &CameraFrame,
        query: &VisualQuery,
        backend: &dyn ChatBackend,
    ) -> Result<MonitorObservation, MonitorError> {
        let user = match &frame.content {
            FrameContent::Raster(raster) => {
                let prepared = self.prepare_raster(&frame.camera_id, raster)?;
                ChatMessage::user(format!("Question: {}", query.text())).with_image(prepared.png)
            }
            FrameContent::Symbolic(entities) => ChatMessage::user(format!(
                "Question: {}\nScene caption: {}",
                query.text(),
                scene_caption(entities)
            )),
        };
        let messages = [ChatMessage::system(monitor_system_text(&frame.camera_id)), user];
        let exchange = llm::complete(&messages, backend)?;
        Ok(MonitorObservation { camera_id: frame.camera_id.clone(), text: exchange.response_text.trim().to_string() })
    }
}

/// Plain-text rendering of a symbolic scene.
pub fn scene_caption(entities: &[SceneEntity]) -> String {
    if entities.is_empty() {
        return "nothing in view".to_string();
    }
    entities
        .iter()
        .map(|e| {
            format!(
                "{} ({} of frame, {}{})",
                e.label,
                e.bearing_in_frame.name(),
                e.apparent_size.name(),
                if e.occluded { ", partially occluded" } else { "" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn entity_clause(e: &SceneEntity) -> String {
    format!(
        "{} visible{}, {} of frame, {}",
        e.label,
        if e.occluded { " (partially occluded)" } else { "" },
        e.bearing_in_frame.name(),
        e.apparent_size.name()
    )
}

/// Fixed-template answer computed from a symbolic frame.
///
/// Non-symbolic frames are answered as if nothing were visible.
pub fn oracle_describe(frame: &CameraFrame, query: &VisualQuery) -> MonitorObservation {
    let entities: &[SceneEntity] = match &frame.content {
        FrameContent::Symbolic(e) => e,
        FrameContent::Raster(_) => &[],
    };
    let q = query.text().to_lowercase();
    let matched: Vec<&SceneEntity> = entities
        .iter()
        .filter(|e| !e.label.is_empty() && q.contains(&e.label.to_lowercase()))
        .collect();
    let text = if let Some((first, rest)) = matched.split_first() {
        let mut s = format!("Yes: {}.", entity_clause(first));
        for e in rest {
            s.push_str(&format!(" Also: {}.", entity_clause(e)));
        }
        s
    } else if entities.is_empty() {
        "No: nothing visible.".to_string()
    } else {
        let listed: Vec<String> = entities
            .iter()
            .map(|e| format!("{} ({} of frame, {})", e.label, e.bearing_in_frame.name(), e.apparent_size.name()))
            .collect();
        format!("No: queried object not visible. Visible: {}.", listed.join(", "))
    };
    MonitorObservation { camera_id: frame.camera_id.clone(), text }
}
