//! Minimal drawing primitives on RGB buffers. Shapes are clipped to the
//! image; text uses the public-domain 8x8 bitmap font.

use font8x8::legacy::BASIC_LEGACY;
pub use image::Rgb;
use image::RgbImage;

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u64) < img.width() as u64 && (y as u64) < img.height() as u64 {
        img.put_pixel(x as u32, y as u32, c);
    }
}

pub fn fill_rect(img: &mut RgbImage, x: i64, y: i64, w: i64, h: i64, c: Rgb<u8>) {
    let x0 = x.max(0);
    let y0 = y.max(0);
    let x1 = (x + w).min(img.width() as i64);
    let y1 = (y + h).min(img.height() as i64);
    for yy in y0..y1 {
        for xx in x0..x1 {
            img.put_pixel(xx as u32, yy as u32, c);
        }
    }
}

/// Rectangle outline of the given stroke width, drawn inward.
pub fn stroke_rect(img: &mut RgbImage, x: i64, y: i64, w: i64, h: i64, stroke: i64, c: Rgb<u8>) {
    let s = stroke.max(1).min(w.min(h).max(1));
    fill_rect(img, x, y, w, s, c);
    fill_rect(img, x, y + h - s, w, s, c);
    fill_rect(img, x, y, s, h, c);
    fill_rect(img, x + w - s, y, s, h, c);
}

/// Filled disc centered on a real-valued point.
pub fn draw_marker(img: &mut RgbImage, cx: f64, cy: f64, radius: i64, c: Rgb<u8>) {
    let (px, py) = (cx.round() as i64, cy.round() as i64);
    let r2 = radius * radius;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= r2 {
                put(img, px + dx, py + dy, c);
            }
        }
    }
}

/// Circle outline, used to emphasize a point.
pub fn draw_ring(img: &mut RgbImage, cx: f64, cy: f64, radius: i64, width: i64, c: Rgb<u8>) {
    let (px, py) = (cx.round() as i64, cy.round() as i64);
    let outer = radius * radius;
    let inner = (radius - width).max(0).pow(2);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let d = dx * dx + dy * dy;
            if d <= outer && d >= inner {
                put(img, px + dx, py + dy, c);
            }
        }
    }
}

/// Renders ASCII text with its top-left corner at `(x, y)`.
pub fn draw_label(img: &mut RgbImage, x: i64, y: i64, text: &str, c: Rgb<u8>, scale: i64) {
    let scale = scale.max(1);
    for (i, ch) in text.chars().enumerate() {
        let code = ch as usize;
        let glyph = if code < BASIC_LEGACY.len() { BASIC_LEGACY[code] } else { BASIC_LEGACY[b'?' as usize] };
        let gx = x + i as i64 * 8 * scale;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) != 0 {
                    fill_rect(img, gx + col * scale, y + row as i64 * scale, scale, scale, c);
                }
            }
        }
    }
}

/// Pixel width of `text` at the given scale.
pub fn label_width(text: &str, scale: i64) -> i64 {
    text.chars().count() as i64 * 8 * scale.max(1)
}
