//! Glyph contour modelling: the control-point data model, TrueType ingest,
//! deletion simulators and the raster / point-cloud metrics used to score
//! completed contours.

pub mod contour;
pub mod corruption;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod io;

pub use contour::{
    renumber, tokenize, validate, validate_with, ControlPoint, CorruptionMeta, CurveFlag,
    DeletedPoint, DeletionMode, GlyphSequence, Limits, Rule, TokenizedSequence, Violation, C_MAX,
    P_MAX,
};
pub use error::{ContourError, Result};
