//! Response distributions: the BCCG (LMS) family and standard-normal
//! helpers.

pub mod bccg;
pub mod normal;

pub use bccg::{bccg_cdf, bccg_logpdf, bccg_quantile, bccg_sample, bccg_zscore, BccgParams, NU_EPS};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};
