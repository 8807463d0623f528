//! Debug overlays: zoom regions, per-iteration points and the ground truth
//! drawn over the screenshot.

use image::RgbImage;

use crate::backend::{encode_png, BackendError, ModalityTag};
use crate::engine::{GroundingResult, GroundingTrace};
use crate::geometry::{Point, Region};
use crate::raster::{draw_label, draw_marker, draw_ring, stroke_rect, Rgb};

const GT_COLOR: Rgb<u8> = Rgb([220, 30, 30]);
const FINAL_COLOR: Rgb<u8> = Rgb([255, 0, 255]);

fn pass_color(m: ModalityTag) -> Rgb<u8> {
    match m {
        ModalityTag::Text => Rgb([255, 140, 0]),
        ModalityTag::Icon => Rgb([0, 160, 80]),
        ModalityTag::Generic => Rgb([30, 90, 255]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OverlayShape {
    ZoomRegion { region: Region, modality: ModalityTag },
    IterationPoint { point: Point, index: u32, modality: ModalityTag },
    FinalPoint { point: Point },
    GroundTruth { region: Region },
}

/// Scene description, in drawing order.
pub fn overlay_shapes(traces: &[GroundingTrace], final_point: Option<Point>, gt_box: Option<Region>) -> Vec<OverlayShape> {
    let mut shapes = Vec::new();
    if let Some(region) = gt_box {
        shapes.push(OverlayShape::GroundTruth { region });
    }
    for t in traces {
        shapes.extend(t.iterations.iter().map(|r| OverlayShape::ZoomRegion { region: r.region, modality: t.modality }));
    }
    for t in traces {
        shapes.extend(t.iterations.iter().map(|r| OverlayShape::IterationPoint {
            point: r.prediction_global,
            index: r.index,
            modality: t.modality,
        }));
    }
    if let Some(point) = final_point.or_else(|| traces.last().map(|t| t.final_point)) {
        shapes.push(OverlayShape::FinalPoint { point });
    }
    shapes
}

pub fn rasterize_overlay(image: &RgbImage, shapes: &[OverlayShape]) -> RgbImage {
    let mut img = image.clone();
    for shape in shapes {
        match *shape {
            OverlayShape::GroundTruth { region } => {
                stroke_rect(&mut img, region.x as i64, region.y as i64, region.width as i64, region.height as i64, 2, GT_COLOR)
            }
            OverlayShape::ZoomRegion { region, modality } => stroke_rect(
                &mut img,
                region.x as i64,
                region.y as i64,
                region.width as i64,
                region.height as i64,
                2,
                pass_color(modality),
            ),
            OverlayShape::IterationPoint { point, index, modality } => {
                let c = pass_color(modality);
                draw_marker(&mut img, point.x, point.y, 4, c);
                draw_label(&mut img, point.x as i64 + 6, point.y as i64 + 6, &index.to_string(), c, 1);
            }
            OverlayShape::FinalPoint { point } => {
                draw_ring(&mut img, point.x, point.y, 11, 3, FINAL_COLOR);
                draw_marker(&mut img, point.x, point.y, 3, FINAL_COLOR);
            }
        }
    }
    img
}

/// PNG of the overlay. Output depends only on the inputs.
pub fn render_trace_overlay(
    image: &RgbImage,
    traces: &[GroundingTrace],
    final_point: Option<Point>,
    gt_box: Option<Region>,
) -> Result<Vec<u8>, BackendError> {
    encode_png(&rasterize_overlay(image, &overlay_shapes(traces, final_point, gt_box)))
}

pub fn render_result_overlay(image: &RgbImage, result: &GroundingResult, gt_box: Option<Region>) -> Result<Vec<u8>, BackendError> {
    render_trace_overlay(image, &result.traces, Some(result.final_point), gt_box)
}
