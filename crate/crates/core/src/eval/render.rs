//! Qualitative glyph plots: outlines coloured by contour, on-curve points
//! as filled squares, off-curve points hollow, deleted points in gray.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::raster::flatten_contour;
use crate::contour::{DeletedPoint, GlyphSequence};
use crate::error::{ContourError, Result};

#[derive(Debug, Clone)]
pub struct Palette {
    pub background: [u8; 3],
    /// Indexed by `contour_id - 1`, cycling.
    pub contours: Vec<[u8; 3]>,
    pub on_curve: [u8; 3],
    pub off_curve: [u8; 3],
    pub deleted: [u8; 3],
    pub size: u32,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [255, 255, 255],
            contours: vec![[31, 119, 180], [255, 127, 14], [44, 160, 44], [148, 103, 189]],
            on_curve: [214, 39, 40],
            off_curve: [23, 80, 200],
            deleted: [160, 160, 160],
            size: 500,
        }
    }
}

impl Palette {
    pub fn contour_color(&self, contour_id: i32) -> [u8; 3] {
        let i = (contour_id.max(1) - 1) as usize % self.contours.len();
        self.contours[i]
    }
}

/// Draws `seq` (and optionally the deleted points) into an image.
pub fn draw(seq: &GlyphSequence, palette: &Palette, deleted: Option<&[DeletedPoint]>) -> RgbImage {
    let size = palette.size;
    let mut img = RgbImage::from_pixel(size, size, Rgb(palette.background));
    let s = size as f64;
    let to_px = |x: f64, y: f64| (x * s, (1.0 - y) * s);

    for contour in seq.contours() {
        let color = Rgb(palette.contour_color(contour[0].contour_id));
        let poly = flatten_contour(contour, size as usize, size as usize);
        for i in 0..poly.len() {
            line(&mut img, poly[i], poly[(i + 1) % poly.len()], color);
        }
    }
    if let Some(deleted) = deleted {
        for d in deleted {
            marker(&mut img, to_px(d.x, d.y), 3, true, Rgb(palette.deleted));
        }
    }
    for p in &seq.points {
        let (color, filled) = if p.on_curve() {
            (palette.on_curve, true)
        } else {
            (palette.off_curve, false)
        };
        marker(&mut img, to_px(p.x, p.y), 3, filled, Rgb(color));
    }
    img
}

pub fn render(
    seq: &GlyphSequence,
    out_path: &Path,
    palette: &Palette,
    deleted: Option<&[DeletedPoint]>,
) -> Result<()> {
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ContourError::io(parent, e))?;
    }
    draw(seq, palette, deleted).save(out_path)?;
    Ok(())
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = a.0 + (b.0 - a.0) * t;
        let y = a.1 + (b.1 - a.1) * t;
        put(img, x.floor() as i64, y.floor() as i64, color);
    }
}

fn marker(img: &mut RgbImage, c: (f64, f64), r: i64, filled: bool, color: Rgb<u8>) {
    let (cx, cy) = (c.0.floor() as i64, c.1.floor() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            if filled || dx.abs() == r || dy.abs() == r {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}
