//! Geometric image operations.

use super::{round_to_u8, Image};
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Bilinear resize under the half-pixel-center convention: output pixel `x`
/// samples source coordinate `(x + 0.5) * w_in / w_out - 0.5`, corner
/// neighbors are clamped to the image border, and the interpolated value is
/// rounded half away from zero per channel.
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Input("resize target must be positive".into()));
    }
    if out_h == img.height() && out_w == img.width() {
        return Ok(img.clone());
    }
    let (h, w) = (img.height(), img.width());
    let mut pixels = Vec::with_capacity(out_h * out_w * 3);
    for y in 0..out_h {
        let sy = (y as f64 + 0.5) * h as f64 / out_h as f64 - 0.5;
        let y0 = sy.floor();
        let fy = sy - y0;
        let y0c = (y0 as isize).clamp(0, h as isize - 1) as usize;
        let y1c = (y0 as isize + 1).clamp(0, h as isize - 1) as usize;
        for x in 0..out_w {
            let sx = (x as f64 + 0.5) * w as f64 / out_w as f64 - 0.5;
            let x0 = sx.floor();
            let fx = sx - x0;
            let x0c = (x0 as isize).clamp(0, w as isize - 1) as usize;
            let x1c = (x0 as isize + 1).clamp(0, w as isize - 1) as usize;

            let p00 = img.get(x0c, y0c);
            let p01 = img.get(x1c, y0c);
            let p10 = img.get(x0c, y1c);
            let p11 = img.get(x1c, y1c);
            for c in 0..3 {
                let v = p00[c] as f64 * (1.0 - fy) * (1.0 - fx)
                    + p01[c] as f64 * (1.0 - fy) * fx
                    + p10[c] as f64 * fy * (1.0 - fx)
                    + p11[c] as f64 * fy * fx;
                pixels.push(round_to_u8(v));
            }
        }
    }
    Image::new(out_h, out_w, pixels)
}

/// Horizontal mirror.
pub fn flip_lr(img: &Image) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.get(w - 1 - x, y));
        }
    }
    out
}

/// Vertical mirror.
pub fn flip_ud(img: &Image) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.get(x, h - 1 - y));
        }
    }
    out
}

/// Shifts content by `(dx, dy)`: `out(x, y) = in(x - dx, y - dy)`, vacated
/// pixels filled with zero (black).
pub fn translate(img: &Image, dx: i32, dy: i32) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    let limit = h.min(w) as i64;
    if (dx as i64).abs() >= limit || (dy as i64).abs() >= limit {
        return Err(Error::Input(format!(
            "translate offset ({dx}, {dy}) exceeds image dimensions {w}x{h}"
        )));
    }
    let mut out = Image::filled(h, w, [0, 0, 0]);
    for y in 0..h as i64 {
        let sy = y - dy as i64;
        if sy < 0 || sy >= h as i64 {
            continue;
        }
        for x in 0..w as i64 {
            let sx = x - dx as i64;
            if sx < 0 || sx >= w as i64 {
                continue;
            }
            out.set(x as usize, y as usize, img.get(sx as usize, sy as usize));
        }
    }
    Ok(out)
}

/// Zero-pads by `pad` on all sides, then crops a uniformly chosen
/// `out_h x out_w` window. Offsets are drawn as `(x, y)` in that order.
pub fn random_crop(
    img: &Image,
    pad: usize,
    out_h: usize,
    out_w: usize,
    rng: &mut RngState,
) -> Result<Image> {
    let padded_h = img.height() + 2 * pad;
    let padded_w = img.width() + 2 * pad;
    if out_h == 0 || out_w == 0 || out_h > padded_h || out_w > padded_w {
        return Err(Error::Input(format!(
            "crop {out_w}x{out_h} does not fit padded image {padded_w}x{padded_h}"
        )));
    }
    let x0 = rng.bounded((padded_w - out_w + 1) as u64) as i64;
    let y0 = rng.bounded((padded_h - out_h + 1) as u64) as i64;

    let mut out = Image::filled(out_h, out_w, [0, 0, 0]);
    for y in 0..out_h as i64 {
        let sy = y0 + y - pad as i64;
        if sy < 0 || sy >= img.height() as i64 {
            continue;
        }
        for x in 0..out_w as i64 {
            let sx = x0 + x - pad as i64;
            if sx < 0 || sx >= img.width() as i64 {
                continue;
            }
            out.set(x as usize, y as usize, img.get(sx as usize, sy as usize));
        }
    }
    Ok(out)
}
