//! Thermal and super-thermal intensity statistics.

pub mod autocorr;
pub mod bessel;
pub mod modes;
pub mod special;
pub mod superthermal;

pub use autocorr::{spatial_autocorrelation, AutocorrFlag, AutocorrResult, LagMap};
pub use bessel::{bessel_k, bessel_k_flagged, bessel_k_scaled, ln_bessel_k};
pub use modes::{
    fit_mode_count, fit_mode_count_above, g2_empirical, multi_pixel_correlation, ModeFit, MultiPixelResult,
};
pub use superthermal::{g2_theory, g_theory_bucket, moment_q, pdf_superthermal, ModeCounts};
