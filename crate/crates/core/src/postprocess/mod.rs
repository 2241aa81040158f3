//! From chain output to a single representative clustering and
//! model-averaged cluster profiles.

mod pam;
mod profiles;
mod select;
mod silhouette;
mod similarity;

pub use pam::*;
pub use profiles::*;
pub use select::*;
pub use silhouette::*;
pub use similarity::*;
