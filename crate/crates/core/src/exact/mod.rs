//! Exact backends: real volume and integer point counting.

pub mod count;
pub mod volume;

pub use count::count_integer_points;
pub use volume::{exact_volume, face_restrict, FaceRestriction};
