pub mod batch;
pub mod cli;
pub mod ddns;
pub mod error;
pub mod fid;
pub mod fit;
pub mod forward;
pub mod lowpass;
pub mod prep;
pub mod quad;
pub mod reconstruction;
pub mod report;
pub mod se;
pub mod sequence;
pub mod special;
pub mod spectrum;
pub mod trace;

pub use error::{FtnsError, Result};
