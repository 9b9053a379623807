pub mod bogolyubov;
pub mod calculus;
pub mod error;
pub mod fqlin;
pub mod gf;
pub mod globality;
pub mod groups;
pub mod scheme;
pub mod spectra;
pub mod suite;

pub use error::{Error, Result};
