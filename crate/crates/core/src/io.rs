//! Image and level-set file I/O.
//!
//! Grayscale PNG (8/16-bit) and binary PGM (P5) are read as raw intensities.
//! Level-set fields use a small binary container:
//!
//! ```text
//! offset 0   b"PHI1"
//! offset 4   width  (u32 LE)
//! offset 8   height (u32 LE)
//! offset 12  reserved, zero (4 bytes)
//! offset 16  width*height f64 LE values, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LevelSetField, RegionMask};

const PHI_MAGIC: &[u8; 4] = b"PHI1";

/// Read a grayscale PNG / PGM as raw intensities plus the format's maximum value.
fn read_gray(path: &Path) -> Result<(ImageGrid, f64)> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok((
            ImageGrid::new(w, h, buf.into_raw().into_iter().map(f64::from).collect())?,
            255.0,
        )),
        DynamicImage::ImageLuma16(buf) => Ok((
            ImageGrid::new(w, h, buf.into_raw().into_iter().map(f64::from).collect())?,
            65535.0,
        )),
        other => Err(Error::Format(format!(
            "{}: expected 8- or 16-bit grayscale, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    Ok(read_gray(path.as_ref())?.0)
}

/// Binary mask: pixels above half the format range are inside.
pub fn read_mask(path: impl AsRef<Path>) -> Result<RegionMask> {
    let (img, max) = read_gray(path.as_ref())?;
    RegionMask::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > 0.5 * max).collect(),
    )
}

pub fn write_mask_png(mask: &RegionMask, path: impl AsRef<Path>) -> Result<()> {
    let buf: GrayImage = ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) {
            255
        } else {
            0
        }])
    });
    buf.save(path.as_ref())?;
    Ok(())
}

fn to_gray8(image: &ImageGrid) -> Vec<u8> {
    let (lo, hi) = image.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    image
        .data()
        .iter()
        .map(|&v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Min-max normalized 8-bit rendering of an image.
pub fn write_image_png(image: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let buf: GrayImage =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, to_gray8(image))
            .expect("buffer size matches");
    buf.save(path.as_ref())?;
    Ok(())
}

/// Image with the mask boundary in red and an optional reference boundary in green.
pub fn write_overlay_png(
    image: &ImageGrid,
    mask: &RegionMask,
    reference: Option<&RegionMask>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let gray = to_gray8(image);
    let w = image.width();
    let mut rgb: RgbImage = ImageBuffer::from_fn(w as u32, image.height() as u32, |x, y| {
        let g = gray[y as usize * w + x as usize];
        Rgb([g, g, g])
    });
    if let Some(r) = reference {
        for p in r.boundary_pixels() {
            rgb.put_pixel(p.x as u32, p.y as u32, Rgb([0, 200, 0]));
        }
    }
    for p in mask.boundary_pixels() {
        rgb.put_pixel(p.x as u32, p.y as u32, Rgb([230, 0, 0]));
    }
    rgb.save(path.as_ref())?;
    Ok(())
}

pub fn encode_levelset(phi: &LevelSetField) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * phi.values().len());
    out.extend_from_slice(PHI_MAGIC);
    out.extend_from_slice(&(phi.width() as u32).to_le_bytes());
    out.extend_from_slice(&(phi.height() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in phi.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_levelset(bytes: &[u8]) -> Result<LevelSetField> {
    if bytes.len() < 16 || &bytes[..4] != PHI_MAGIC {
        return Err(Error::Format("missing PHI1 header".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != 8 * w * h {
        return Err(Error::Format(format!(
            "PHI1 body has {} bytes, expected {} for {w}x{h}",
            body.len(),
            8 * w * h
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LevelSetField::new(w, h, values)
}

pub fn write_levelset(phi: &LevelSetField, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_levelset(phi))?;
    Ok(())
}

pub fn read_levelset(path: impl AsRef<Path>) -> Result<LevelSetField> {
    decode_levelset(&fs::read(path)?)
}
