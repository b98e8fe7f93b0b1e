//! Link-level simulator and analysis toolkit for differential spatial
//! modulation over pinching-antenna systems.
//!
//! The crate builds the full chain: unitary codeword construction
//! ([`codebook`]), position-dependent Rician channel statistics
//! ([`channel`]), differential encoding with noncoherent ML detection
//! ([`link`]), the MGF-based semi-analytical BER upper bound and diversity
//! checks ([`analysis`]), and a seeded Monte Carlo BER engine with scenario
//! presets and CSV/JSON output ([`harness`]).

pub mod analysis;
pub mod bits;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod link;
pub mod quad;

pub use error::{Error, Result};

pub(crate) mod util {
    use nalgebra::{Dim, Matrix};
    use num_complex::Complex64;

    /// Largest modulus over the entries of a complex matrix or vector.
    pub fn max_abs<R, C, S>(m: &Matrix<Complex64, R, C, S>) -> f64
    where
        R: Dim,
        C: Dim,
        S: nalgebra::storage::Storage<Complex64, R, C>,
    {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
