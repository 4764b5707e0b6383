//! Image rasters, lesion masks and the geometric primitives shared by all
//! feature families.

mod contour;
mod gradient;
mod image;
pub mod io;
mod mask;
mod quantize;

pub use contour::{trace_boundary, ContourPath};
pub use gradient::gradient_magnitude;
pub use image::Image2D;
pub(crate) use mask::NEIGHBORS_8;
pub use mask::{disc_offsets, rasterize_polygon, ring_region, RoiMask, RoiPolygon};
pub use quantize::{quantize, QuantizedPatch};
