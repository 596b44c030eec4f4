//! Neural pieces: initialization, the motif conv unit, attention fusion,
//! loss heads, the stacked model, Adam, gradient checking, checkpoints.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod model;
