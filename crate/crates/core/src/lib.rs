//! Volume computation, volume estimation and integer solution counting for
//! Boolean combinations of linear constraints.

pub mod deadline;
pub mod driver;
pub mod enumerate;
pub mod error;
pub mod exact;
pub mod frontends;
pub mod lp;
pub mod model;
pub mod polyvest;

pub use error::{BackendError, Error, LpError, ParseError};
pub use model::*;
