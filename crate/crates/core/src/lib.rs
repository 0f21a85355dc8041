//! Row-crop weed mapping and spray prescription toolkit.
//!
//! The crate turns a georeferenced RGB orthomosaic of a row crop into a
//! spray/no-spray prescription map and scores how a section-control sprayer
//! would apply it:
//!
//! 1. [`raster`] computes the excess-green index and thresholds it into a
//!    vegetation mask.
//! 2. [`rowdetect`] tiles the mask, projects each tile onto its row axis and
//!    turns profile peaks into crop-row lines.
//! 3. [`weedmap`] buffers the rows and keeps the off-row vegetation as weeds.
//! 4. [`prescription`] grids the treatment extent and sprays every cell that
//!    holds at least one weed pixel.
//! 5. [`sprayersim`] replays the prescription with per-nozzle on/off control
//!    and reports application accuracy and savings.
//!
//! [`analysis`] holds the post-season statistics and [`synthfield`] generates
//! synthetic fields with known ground truth.

pub mod analysis;
pub mod error;
mod geojson;
pub mod geom;
pub mod prescription;
pub mod raster;
pub mod rowdetect;
pub mod sprayersim;
pub mod synthfield;
pub mod weedmap;

pub use error::{Error, Result};
pub use geom::{Axis, Rect};
pub use raster::{BinaryMask, GeoTransform, Raster, ScalarField};
