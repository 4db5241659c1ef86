//! Side-by-side visual prompt: annotated egocentric view on the left, the
//! hand-drawn map with the (pruned) robot-node chain on the right.

use crate::raster::{draw_text, text_width, GLYPH};
use crate::topomap::TopoMap;
use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_line_segment_mut};

use super::PromptError;

pub const NODE_COLOR: Rgb<u8> = Rgb([128, 0, 128]);
pub const EDGE_COLOR: Rgb<u8> = Rgb([190, 120, 190]);
pub const LABEL_COLOR: Rgb<u8> = Rgb([20, 20, 160]);
const ID_COLOR: Rgb<u8> = Rgb([255, 255, 255]);
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
pub const NODE_RADIUS: i32 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SvapImage {
    pub image: RgbImage,
    pub view_width: u32,
    pub node_ids: Vec<usize>,
}

pub fn render_svap(view: &RgbImage, map_image: &RgbImage, topo: &TopoMap) -> Result<SvapImage, PromptError> {
    if topo.robot_nodes.is_empty() {
        return Err(PromptError::EmptyCandidateSet);
    }
    let (vw, vh) = view.dimensions();
    let (mw, mh) = map_image.dimensions();
    let mut out = RgbImage::from_pixel(vw + mw, vh.max(mh), BACKGROUND);
    image::imageops::replace(&mut out, view, 0, 0);
    image::imageops::replace(&mut out, map_image, i64::from(vw), 0);

    let off = vw as f32;
    let pos = |p: crate::geometry::Point| (p.x as f32 + off, p.y as f32);
    for pair in topo.robot_nodes.windows(2) {
        if pair[1].id == pair[0].id + 1 {
            draw_line_segment_mut(&mut out, pos(pair[0].position), pos(pair[1].position), EDGE_COLOR);
        }
    }
    for l in &topo.landmark_nodes {
        let (x, y) = pos(l.position);
        let label = if l.predicted { format!("{} {}", l.label, super::plan::EXPECTED_MARKER) } else { l.label.clone() };
        draw_text(&mut out, x as i64 + 4, y as i64 - i64::from(GLYPH) - 2, &label, LABEL_COLOR);
    }
    for n in &topo.robot_nodes {
        let (x, y) = pos(n.position);
        let (cx, cy) = (x.round() as i32, y.round() as i32);
        draw_filled_circle_mut(&mut out, (cx, cy), NODE_RADIUS, NODE_COLOR);
        let id = n.id.to_string();
        let tw = text_width(&id) as i64;
        draw_text(&mut out, i64::from(cx) - tw / 2, i64::from(cy) - i64::from(GLYPH) / 2, &id, ID_COLOR);
    }
    Ok(SvapImage { image: out, view_width: vw, node_ids: topo.robot_ids() })
}
