pub mod analysis;
pub mod channel;
pub mod ehmodel;
pub mod error;
pub mod mcsim;
pub mod numerics;
pub mod scenario;
pub mod specfun;

pub use error::{Error, Result};
