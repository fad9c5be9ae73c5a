pub mod asdim;
pub mod cli;
pub mod decomp;
pub mod equidecomp;
pub mod flows;
pub mod error;
pub mod grid_graph;
pub mod locality;
pub mod render;
pub mod vertex_set;

pub use error::{Error, Result};
pub use grid_graph::{ActionSpec, Edge, EdgeSet, TorusAction};
pub use vertex_set::VertexSet;
