pub mod cli;
pub mod error;
pub mod fedsim;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod refine;
pub mod semantic;
pub mod structural;

pub use error::{Error, Result};
