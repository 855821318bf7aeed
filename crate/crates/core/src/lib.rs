pub mod analysis;
pub mod geo;
pub mod graph;
pub mod metapath;
pub mod par;
pub mod pipeline;
pub mod synthetic;
pub mod vgae;
