//! Texture family: co-occurrence (Haralick), Gabor, run-length and wavelet features.

pub mod gabor;
pub mod glcm;
pub mod rlm;
pub mod wavelet;

pub use gabor::{gabor_features, GaborBank, GaborKernel};
pub use glcm::{glcm_matrix, haralick_features, Glcm};
pub use rlm::{rlm_features, run_length_matrix, RunLengthMatrix};
pub use wavelet::{daubechies_histogram_features, haar_features};

/// Gray levels used for co-occurrence and run-length quantisation.
pub const TEXTURE_LEVELS: usize = 32;
