//! Binary glyph rasterization with TrueType quadratic semantics and the
//! nonzero winding rule.

use crate::contour::{ControlPoint, GlyphSequence};

/// Side of the square metric raster.
pub const RASTER_SIZE: usize = 250;

/// Maximum distance between a flattened segment and its curve, in pixels.
const FLATTEN_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Coverage (0 or 1) at column `x`, row `y`; row 0 is the top.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn filled(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// Pixel-space point; `y` grows downwards.
pub type PixelPoint = (f64, f64);

/// Flattened outline of one contour as a closed polyline.
pub fn flatten_contour(points: &[ControlPoint], width: usize, height: usize) -> Vec<PixelPoint> {
    let to_px = |p: &ControlPoint| (p.x * width as f64, (1.0 - p.y) * height as f64);
    let pts: Vec<(PixelPoint, bool)> = points.iter().map(|p| (to_px(p), p.on_curve())).collect();
    let mut out = Vec::new();
    let n = pts.len();
    if n == 0 {
        return out;
    }
    // Start on an on-curve point, or at the implied midpoint when there is none.
    let (start, order): (PixelPoint, Vec<usize>) = match pts.iter().position(|p| p.1) {
        Some(s) => (pts[s].0, (1..=n).map(|k| (s + k) % n).collect()),
        None => (mid(pts[n - 1].0, pts[0].0), (0..n).collect()),
    };
    out.push(start);
    let mut anchor = start;
    let mut control: Option<PixelPoint> = None;
    let mut visit = |q: PixelPoint, on: bool, out: &mut Vec<PixelPoint>| {
        match (on, control) {
            (true, Some(c)) => {
                quad(anchor, c, q, out);
                anchor = q;
                control = None;
            }
            (true, None) => {
                out.push(q);
                anchor = q;
            }
            (false, Some(c)) => {
                let m = mid(c, q);
                quad(anchor, c, m, out);
                anchor = m;
                control = Some(q);
            }
            (false, None) => control = Some(q),
        }
    };
    for &i in &order {
        visit(pts[i].0, pts[i].1, &mut out);
    }
    if pts.iter().all(|p| !p.1) {
        visit(start, true, &mut out);
    }
    out
}

fn mid(a: PixelPoint, b: PixelPoint) -> PixelPoint {
    ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
}

/// Uniform subdivision: a quadratic split into `n` pieces deviates from its
/// chords by at most `|p0 - 2 p1 + p2| / (4 n^2)`.
fn quad(p0: PixelPoint, p1: PixelPoint, p2: PixelPoint, out: &mut Vec<PixelPoint>) {
    let dd = ((p0.0 - 2.0 * p1.0 + p2.0).powi(2) + (p0.1 - 2.0 * p1.1 + p2.1).powi(2)).sqrt();
    let n = ((dd / (4.0 * FLATTEN_TOLERANCE)).sqrt().ceil() as usize).max(1);
    for k in 1..=n {
        let t = k as f64 / n as f64;
        let u = 1.0 - t;
        out.push((
            u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0,
            u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1,
        ));
    }
}

pub fn rasterize(seq: &GlyphSequence) -> RasterImage {
    rasterize_with(seq, RASTER_SIZE, RASTER_SIZE)
}

/// Fills pixels whose centre has nonzero winding number. Each contour is
/// closed implicitly.
pub fn rasterize_with(seq: &GlyphSequence, width: usize, height: usize) -> RasterImage {
    let mut img = RasterImage::blank(width, height);
    let mut edges: Vec<(PixelPoint, PixelPoint)> = Vec::new();
    for contour in seq.contours() {
        let poly = flatten_contour(contour, width, height);
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            if a.1 != b.1 {
                edges.push((a, b));
            }
        }
    }
    if edges.is_empty() {
        return img;
    }
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for row in 0..height {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for &(a, b) in &edges {
            let dir = if a.1 <= yc && yc < b.1 {
                1
            } else if b.1 <= yc && yc < a.1 {
                -1
            } else {
                continue;
            };
            let t = (yc - a.1) / (b.1 - a.1);
            crossings.push((a.0 + t * (b.0 - a.0), dir));
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut winding = 0;
        for pair in crossings.windows(2) {
            winding += pair[0].1;
            if winding == 0 {
                continue;
            }
            // Pixel centres px + 0.5 inside [x0, x1).
            let x0 = (pair[0].0 - 0.5).ceil().max(0.0) as usize;
            let x1 = ((pair[1].0 - 0.5).ceil().max(0.0) as usize).min(width);
            for x in x0..x1 {
                img.data[row * width + x] = 1;
            }
        }
    }
    img
}

/// Sum of absolute per-pixel differences of the two metric rasters.
pub fn l1_distance(a: &GlyphSequence, b: &GlyphSequence) -> f64 {
    raster_l1(&rasterize(a), &rasterize(b))
}

pub fn raster_l1(a: &RasterImage, b: &RasterImage) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height), "raster size mismatch");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| (p as i32 - q as i32).unsigned_abs() as u64)
        .sum::<u64>() as f64
}
