//! Centrally symmetric convex bodies given by support functions, and the
//! Banach-Mazur and shape distances between them.

mod body;
mod control;
mod fit;
mod grid;
mod metric;
mod optim;
mod record;
mod shape;
mod surrogate;

pub use body::{linear_image, make_primitive, support_eval, BodyKind, LinearMap, Primitive, SupportBody, SupportFn};
pub use control::ControlSet;
pub use fit::{fit_ellipsoid, whitening_map};
pub use grid::{DirectionGrid, GridMethod};
pub use metric::{bm_distance, containment_factor};
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use record::{BodyRecord, ShapeSpec};
pub use shape::{shape_distance, InitOrder, ShapeOptions, ShapeResult};
