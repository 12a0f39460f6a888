//! Rasterization of point clouds and norm fields.
//!
//! Everything renders to in-memory byte buffers in formats with fully
//! deterministic bytes (no timestamps, no metadata): binary PGM for grayscale
//! histograms, binary PPM for color heatmaps, and raw RGBA for canvas-style
//! consumers. One-dimensional systems render as horizontal strips.

use crate::error::{Error, Result};
use crate::norm::PseudoNorm;

/// Axis-aligned view mapping world coordinates to a pixel grid.
#[derive(Debug, Clone)]
pub struct Viewport {
    /// Source dimension of the points this viewport will consume.
    pub n: usize,
    /// World axis drawn along screen x.
    pub axis_x: usize,
    /// World axis drawn along screen y (ignored when `n == 1`).
    pub axis_y: usize,
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub width: usize,
    pub height: usize,
}

impl Viewport {
    /// Fit a viewport around a flat n-stride point cloud with a relative
    /// margin on each side.
    pub fn fit(
        points: &[f64],
        n: usize,
        axis_x: usize,
        axis_y: usize,
        width: usize,
        height: usize,
        margin: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("viewport must have positive size".into()));
        }
        if n == 0 || axis_x >= n || (n > 1 && axis_y >= n) {
            return Err(Error::InvalidParameter("viewport axes out of range".into()));
        }
        let count = points.len() / n;
        if count == 0 {
            return Err(Error::EmptySet { context: "viewport fit over empty cloud".into() });
        }
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for i in 0..count {
            let x = points[i * n + axis_x];
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            if n > 1 {
                let y = points[i * n + axis_y];
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
        if n == 1 {
            min_y = 0.0;
            max_y = 1.0;
        }
        let pad_x = (max_x - min_x).max(1e-12) * margin;
        let pad_y = (max_y - min_y).max(1e-12) * margin;
        Ok(Viewport {
            n,
            axis_x,
            axis_y: if n > 1 { axis_y } else { 0 },
            min_x: min_x - pad_x,
            max_x: max_x + pad_x,
            min_y: min_y - pad_y,
            max_y: max_y + pad_y,
            width,
            height,
        })
    }

    /// Pixel containing a world point, if inside the view.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.min_x) / (self.max_x - self.min_x);
        let fy = (y - self.min_y) / (self.max_y - self.min_y);
        if !(0.0..1.0 + 1e-12).contains(&fx) || !(0.0..1.0 + 1e-12).contains(&fy) {
            return None;
        }
        let px = ((fx * self.width as f64) as usize).min(self.width - 1);
        // Screen y grows downward; world y grows upward.
        let py = (((1.0 - fy) * self.height as f64) as usize).min(self.height - 1);
        Some((px, py))
    }

    /// World coordinates of a pixel center (x and the drawn y axis).
    pub fn center_of(&self, px: usize, py: usize) -> (f64, f64) {
        let fx = (px as f64 + 0.5) / self.width as f64;
        let fy = 1.0 - (py as f64 + 0.5) / self.height as f64;
        (
            self.min_x + fx * (self.max_x - self.min_x),
            self.min_y + fy * (self.max_y - self.min_y),
        )
    }
}

/// Per-pixel visit counts for a point cloud. One-dimensional clouds fill
/// every row with the same column histogram, producing a strip.
pub fn histogram(vp: &Viewport, points: &[f64]) -> Vec<u32> {
    let mut counts = vec![0u32; vp.width * vp.height];
    let n = vp.n;
    let total = points.len() / n;
    if n == 1 {
        let mut cols = vec![0u32; vp.width];
        for i in 0..total {
            if let Some((px, _)) = vp.pixel_of(points[i], 0.5) {
                cols[px] = cols[px].saturating_add(1);
            }
        }
        for row in counts.chunks_mut(vp.width) {
            row.copy_from_slice(&cols);
        }
    } else {
        for i in 0..total {
            let x = points[i * n + vp.axis_x];
            let y = points[i * n + vp.axis_y];
            if let Some((px, py)) = vp.pixel_of(x, y) {
                let idx = py * vp.width + px;
                counts[idx] = counts[idx].saturating_add(1);
            }
        }
    }
    counts
}

/// Log tone map: zero stays black, the maximum count lands on 255.
pub fn tone_map_log(counts: &[u32]) -> Vec<u8> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0; counts.len()];
    }
    let denom = (1.0 + max as f64).ln();
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0
            } else {
                let v = (1.0 + c as f64).ln() / denom;
                (v * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

/// Binary PGM (P5) bytes from grayscale values.
pub fn pgm_bytes(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    if gray.len() != width * height {
        return Err(Error::InvalidParameter("gray buffer does not match size".into()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

/// Binary PPM (P6) bytes from RGB triples.
pub fn ppm_bytes(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != width * height * 3 {
        return Err(Error::InvalidParameter("rgb buffer does not match size".into()));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    Ok(out)
}

/// Straight RGBA (opaque) from grayscale, for canvas-style buffers.
pub fn rgba_from_gray(gray: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(gray.len() * 4);
    for &g in gray {
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

/// Map `t ∈ [0,1]` onto a dark-blue → amber → white ramp.
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, f: f64| a + (b - a) * f;
    let (r, g, b) = if t < 0.5 {
        let f = t / 0.5;
        (lerp(15.0, 224.0, f), lerp(22.0, 146.0, f), lerp(68.0, 28.0, f))
    } else {
        let f = (t - 0.5) / 0.5;
        (lerp(224.0, 255.0, f), lerp(146.0, 250.0, f), lerp(28.0, 235.0, f))
    };
    [r.round() as u8, g.round() as u8, b.round() as u8]
}

/// Heatmap of `ln w` over the viewport on pixel centers, color-ramped
/// between the finite minimum and maximum in view. One-dimensional norms
/// draw the same row everywhere.
pub fn norm_heatmap_rgb(vp: &Viewport, pn: &PseudoNorm) -> Vec<u8> {
    let n = vp.n;
    let mut values = vec![f64::NAN; vp.width * vp.height];
    let rows = if n == 1 { 1 } else { vp.height };
    for py in 0..rows {
        for px in 0..vp.width {
            let (x, y) = vp.center_of(px, py);
            let mut p = vec![0.0; n];
            p[vp.axis_x] = x;
            if n > 1 {
                p[vp.axis_y] = y;
            }
            let w = pn.eval(&p);
            values[py * vp.width + px] = if w > 0.0 { w.ln() } else { f64::NAN };
        }
    }
    if n == 1 {
        for py in 1..vp.height {
            let (head, tail) = values.split_at_mut(py * vp.width);
            tail[..vp.width].copy_from_slice(&head[..vp.width]);
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = (hi - lo).max(1e-12);
    let mut rgb = Vec::with_capacity(values.len() * 3);
    for &v in &values {
        if v.is_finite() {
            rgb.extend_from_slice(&ramp_color((v - lo) / span));
        } else {
            rgb.extend_from_slice(&[0, 0, 0]);
        }
    }
    rgb
}

/// Render a cloud to finished PGM bytes: fit, bin, tone-map, encode.
pub fn render_cloud_pgm(
    points: &[f64],
    n: usize,
    width: usize,
    height: usize,
    margin: f64,
) -> Result<Vec<u8>> {
    let vp = Viewport::fit(points, n, 0, if n > 1 { 1 } else { 0 }, width, height, margin)?;
    let counts = histogram(&vp, points);
    let gray = tone_map_log(&counts);
    pgm_bytes(width, height, &gray)
}
