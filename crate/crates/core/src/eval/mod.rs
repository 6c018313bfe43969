//! Scoring completed contours: rasterized L1, control-point Hausdorff,
//! aggregated reports and qualitative plots.

pub mod hausdorff;
pub mod raster;
pub mod render;
pub mod report;

pub use hausdorff::{directed_hausdorff, hausdorff};
pub use raster::{l1_distance, rasterize, RasterImage, RASTER_SIZE};
pub use render::{render, Palette};
pub use report::{evaluate, evaluate_item, Aggregate, CurvePoint, EvalItem, EvalReport, EvalRow};
