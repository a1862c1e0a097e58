//! Low-resolution frames are cropped and enlarged before a vision model
//! sees them. This writes the before/after images for inspection.
//!
//! ```text
//! cargo run --example monitor_upscale -- /tmp/frames
//! ```

use agentic_control::monitor::{upscale, Raster};
use image::{Rgb, RgbImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "frames".into()));
    std::fs::create_dir_all(&out)?;

    // A 64x48 "camera frame": sky gradient with a green box.
    let frame = RgbImage::from_fn(64, 48, |x, y| {
        if (24..36).contains(&x) && (28..40).contains(&y) {
            Rgb([30, 160, 60])
        } else {
            Rgb([(x * 4) as u8, (y * 5) as u8, 200])
        }
    });
    let small = Raster::encode(&frame)?;
    let large = upscale(&small, (512, 384))?;
    std::fs::write(out.join("frame_small.png"), &small.png)?;
    std::fs::write(out.join("frame_large.png"), &large.png)?;
    println!("{}x{} -> {}x{}; wrote {}", small.width, small.height, large.width, large.height, out.display());
    Ok(())
}
