//! Small drawing helpers shared by the view annotator and the SVAP renderer.

use image::{Rgb, RgbImage};

pub const GLYPH: u32 = 8;

/// Draws `text` with the 8x8 bitmap font, top-left corner at (x, y).
/// Pixels falling outside the image are clipped.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: Rgb<u8>) {
    use font8x8::UnicodeFonts;
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    for (i, ch) in text.chars().enumerate() {
        let glyph = font8x8::BASIC_FONTS.get(ch).or_else(|| font8x8::BASIC_FONTS.get('?'));
        let Some(rows) = glyph else { continue };
        let gx = x + i as i64 * i64::from(GLYPH);
        for (row, bits) in rows.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                let px = gx + col;
                let py = y + row as i64;
                if px >= 0 && py >= 0 && px < w && py < h {
                    img.put_pixel(px as u32, py as u32, color);
                }
            }
        }
    }
}

pub fn text_width(text: &str) -> u32 {
    text.chars().count() as u32 * GLYPH
}

/// One-pixel rectangle outline; coordinates are inclusive and clipped.
pub fn draw_rect_outline(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}
