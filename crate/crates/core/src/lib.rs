pub mod autograd;
pub mod beats;
pub mod eval;
pub mod gradsuite;
pub mod model;
pub mod train;
pub mod wfdb;
