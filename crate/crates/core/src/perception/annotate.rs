use crate::action::TurnDirection;
use crate::raster::{draw_rect_outline, draw_text, GLYPH};
use image::{Rgb, RgbImage};

use super::{BBox, DetectedObject, DetectedTurn};

pub const OBJECT_COLOR: Rgb<u8> = Rgb([255, 105, 180]);
pub const STRUCTURAL_COLOR: Rgb<u8> = Rgb([0, 200, 0]);

/// Pixel rectangle (inclusive) of a box border, clipped to the image.
pub(crate) fn border_rect(bbox: &BBox, width: u32, height: u32) -> (i64, i64, i64, i64) {
    let x0 = bbox.x_min.floor() as i64;
    let y0 = bbox.y_min.floor() as i64;
    let x1 = (bbox.x_max.ceil() as i64 - 1).clamp(x0, i64::from(width) - 1);
    let y1 = (bbox.y_max.ceil() as i64 - 1).clamp(y0, i64::from(height) - 1);
    (x0, y0, x1, y1)
}

/// Top-left corner of a box's label: above the box, or just inside it
/// when there is no room above.
pub(crate) fn label_origin(bbox: &BBox) -> (i64, i64) {
    let (x0, y0) = (bbox.x_min.floor() as i64, bbox.y_min.floor() as i64);
    let y = if y0 > i64::from(GLYPH) { y0 - i64::from(GLYPH) - 1 } else { y0 + 2 };
    (x0, y)
}

fn draw_box(img: &mut RgbImage, bbox: &BBox, label: &str, color: Rgb<u8>) {
    let (x0, y0, x1, y1) = border_rect(bbox, img.width(), img.height());
    draw_rect_outline(img, x0, y0, x1, y1, color);
    let (lx, ly) = label_origin(bbox);
    draw_text(img, lx, ly, label, color);
}

/// Draws object boxes in pink and structural boxes in green, each labelled.
pub fn annotate_view(view: &RgbImage, objects: &[DetectedObject], turns: &[DetectedTurn]) -> RgbImage {
    let mut out = view.clone();
    for o in objects {
        draw_box(&mut out, &o.bbox, &o.label, OBJECT_COLOR);
    }
    for t in turns {
        let label = match t.direction {
            TurnDirection::Left => "left turn",
            TurnDirection::Right => "right turn",
        };
        draw_box(&mut out, &t.bbox, label, STRUCTURAL_COLOR);
    }
    out
}
