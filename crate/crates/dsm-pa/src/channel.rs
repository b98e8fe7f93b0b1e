//! Equivalent-channel statistics from pinching geometry and quasi-static
//! Rician sampling.
//!
//! Each pinching position `l` exposes one radiating element per waveguide
//! `n`, with coefficient
//! `h_{n,l} = sqrt(beta) (sqrt(K/(K+1)) hbar + sqrt(1/(K+1)) w) gamma`,
//! `beta = d^(-alpha)`, `gamma = exp(-j 2 pi d / lambda)`, `w ~ CN(0,1)`.
//! The stacked vector is ordered position-major: `[h_{1,1}, h_{2,1}, ...]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Shortest receiver-to-element distance accepted before the path-loss model
/// diverges.
pub const MIN_DISTANCE_M: f64 = 1e-3;

/// Physical layout: waveguide pair, candidate pinching positions, receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Side length of the service region in meters.
    pub region_side: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Height of both waveguides in meters.
    pub waveguide_height: f64,
    /// y-coordinates of the two waveguides in meters.
    pub waveguide_y: [f64; 2],
    /// x-coordinates of the pinching positions along each waveguide.
    pub position_x: Vec<f64>,
    /// Receiver coordinate in meters.
    pub receiver: [f64; 3],
}

impl Geometry {
    /// Layout used throughout the experiments: 20 m region, 28 GHz carrier,
    /// 3 m waveguides 0.5 m apart centered in the region, receiver at
    /// (13.2, 7.1, 0).
    pub fn default_deployment(position_x: Vec<f64>) -> Self {
        Self {
            region_side: 20.0,
            carrier_freq: 28e9,
            waveguide_height: 3.0,
            waveguide_y: [9.75, 10.25],
            position_x,
            receiver: [13.2, 7.1, 0.0],
        }
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn num_positions(&self) -> usize {
        self.position_x.len()
    }

    /// Coordinate of the element on waveguide `n` at position `l` (0-based).
    pub fn pinch_coordinate(&self, waveguide: usize, position: usize) -> [f64; 3] {
        [
            self.position_x[position],
            self.waveguide_y[waveguide],
            self.waveguide_height,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_freq <= 0.0 {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        if self.waveguide_y[0] == self.waveguide_y[1] {
            return Err(Error::Config("waveguide y-coordinates must be distinct".into()));
        }
        if self.position_x.is_empty() {
            return Err(Error::Config("need at least one pinching position".into()));
        }
        for &x in &self.position_x {
            if !(0.0..=self.region_side).contains(&x) {
                return Err(Error::Config(format!(
                    "pinching position {x} m outside region [0, {}]",
                    self.region_side
                )));
            }
        }
        Ok(())
    }
}

/// Large-scale and Rician parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent `alpha`.
    pub path_loss_exponent: f64,
    /// Rician K-factor (linear), uniform across elements.
    pub rician_factor: f64,
    /// Unit-modulus deterministic line-of-sight component.
    pub los_component: Complex64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.2,
            rician_factor: 5.0,
            los_component: Complex64::new(1.0, 0.0),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.path_loss_exponent <= 0.0 {
            return Err(Error::Config("path-loss exponent must be positive".into()));
        }
        if self.rician_factor < 0.0 {
            return Err(Error::Config("Rician factor must be nonnegative".into()));
        }
        if (self.los_component.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("LoS component must be unit-modulus".into()));
        }
        Ok(())
    }
}

/// First- and second-order statistics of the equivalent channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    mean: Vec<Complex64>,
    variance: Vec<f64>,
}

impl ChannelStats {
    /// Builds stats directly from a mean vector and per-component variances,
    /// bypassing the geometry (synthetic channels, reduced test cases).
    pub fn from_parts(mean: Vec<Complex64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::Config(format!(
                "mean and variance lengths must match and be nonzero: {} vs {}",
                mean.len(),
                variance.len()
            )));
        }
        if variance.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("variances must be finite and nonnegative".into()));
        }
        Ok(Self { mean, variance })
    }

    /// Mean vector, position-major ordering.
    pub fn mean(&self) -> &[Complex64] {
        &self.mean
    }

    /// Diagonal of the covariance matrix.
    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(
            &nalgebra::DVector::from_iterator(
                self.variance.len(),
                self.variance.iter().map(|&v| Complex64::new(v, 0.0)),
            ),
        )
    }

    pub fn mean_vector(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_column_slice(&self.mean)
    }
}

/// Euclidean propagation distance between receiver and element coordinates.
pub fn propagation_distance(receiver: &[f64; 3], pinch: &[f64; 3]) -> f64 {
    receiver
        .iter()
        .zip(pinch)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Derives the equivalent-channel mean and (diagonal) covariance from the
/// deployment geometry. Entry `2l + n` holds waveguide `n` at position `l`.
pub fn channel_stats(geom: &Geometry, params: &ChannelParams) -> Result<ChannelStats> {
    geom.validate()?;
    params.validate()?;
    let wavelength = geom.wavelength();
    let k = params.rician_factor;
    let mut mean = Vec::with_capacity(2 * geom.num_positions());
    let mut variance = Vec::with_capacity(2 * geom.num_positions());
    for position in 0..geom.num_positions() {
        for waveguide in 0..2 {
            let d = propagation_distance(
                &geom.receiver,
                &geom.pinch_coordinate(waveguide, position),
            );
            if d < MIN_DISTANCE_M {
                return Err(Error::Singularity(format!(
                    "receiver within {MIN_DISTANCE_M} m of pinching position {position} on waveguide {waveguide}"
                )));
            }
            let beta = d.powf(-params.path_loss_exponent);
            let phase = Complex64::from_polar(1.0, -std::f64::consts::TAU * d / wavelength);
            mean.push(beta.sqrt() * (k / (k + 1.0)).sqrt() * params.los_component * phase);
            variance.push(beta / (k + 1.0));
        }
    }
    Ok(ChannelStats { mean, variance })
}

/// One quasi-static draw of the equivalent channel, constant over a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    coefficients: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn as_vector(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_column_slice(&self.coefficients)
    }
}

/// Draws a circularly-symmetric complex Gaussian scalar with unit variance
/// (`E|w|^2 = 1`).
pub fn standard_complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Samples `h = mu + Sigma^(1/2) w` with `w ~ CN(0, I)`.
pub fn sample_channel<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> ChannelRealization {
    let coefficients = stats
        .mean
        .iter()
        .zip(&stats.variance)
        .map(|(&mu, &var)| mu + var.sqrt() * standard_complex_gaussian(rng))
        .collect();
    ChannelRealization { coefficients }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_setup() -> (Geometry, ChannelParams) {
        (
            Geometry::default_deployment(vec![1.5, 7.5, 18.5]),
            ChannelParams::default(),
        )
    }

    #[test]
    fn distance_examples() {
        let p = [1.5, 9.75, 3.0];
        assert_eq!(propagation_distance(&p, &p), 0.0);
        let receiver = [13.2, 7.1, 0.0];
        let d = propagation_distance(&receiver, &p);
        // sqrt(11.7^2 + 2.65^2 + 3^2)
        assert!((d - 152.9125f64.sqrt()).abs() < 1e-12);
        assert!((d - 12.3658).abs() < 1e-4);
        assert_eq!(d, propagation_distance(&p, &receiver));
    }

    #[test]
    fn stats_obey_rician_power_split() {
        let (geom, params) = default_setup();
        let stats = channel_stats(&geom, &params).unwrap();
        assert_eq!(stats.dim(), 6);
        for (l, chunk) in stats.mean().chunks(2).enumerate() {
            for (n, mu) in chunk.iter().enumerate() {
                let d = propagation_distance(&geom.receiver, &geom.pinch_coordinate(n, l));
                let beta = d.powf(-params.path_loss_exponent);
                let var = stats.variance()[2 * l + n];
                // K = 5: sigma^2 = beta/6, |mu|^2 = 5 beta/6
                assert!((var - beta / 6.0).abs() < 1e-15);
                assert!((mu.norm_sqr() - 5.0 * beta / 6.0).abs() < 1e-15);
                assert!((mu.norm_sqr() + var - beta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_los_limit_kills_variance() {
        let (geom, mut params) = default_setup();
        params.rician_factor = 1e12;
        let stats = channel_stats(&geom, &params).unwrap();
        for (mu, var) in stats.mean().iter().zip(stats.variance()) {
            assert!(*var < 1e-12);
            // |mu|^2 -> beta
            assert!((mu.norm_sqr() / (mu.norm_sqr() + var) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn los_rotation_changes_mean_phase_only() {
        let (geom, mut params) = default_setup();
        let base = channel_stats(&geom, &params).unwrap();
        params.los_component = Complex64::from_polar(1.0, 1.234);
        let rotated = channel_stats(&geom, &params).unwrap();
        for i in 0..base.dim() {
            assert!(rotated.variance()[i].to_bits() == base.variance()[i].to_bits());
            assert!((rotated.mean()[i].norm() - base.mean()[i].norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_distance_scales_beta_by_pathloss_exponent() {
        let (geom, params) = default_setup();
        let mut far = geom.clone();
        // double every receiver-element distance by scaling all coordinates
        for x in &mut far.position_x {
            *x *= 2.0;
        }
        far.waveguide_y = [2.0 * geom.waveguide_y[0], 2.0 * geom.waveguide_y[1]];
        far.waveguide_height *= 2.0;
        far.receiver = [2.0 * geom.receiver[0], 2.0 * geom.receiver[1], 0.0];
        far.region_side *= 2.0;
        let near_stats = channel_stats(&geom, &params).unwrap();
        let far_stats = channel_stats(&far, &params).unwrap();
        let scale = 2f64.powf(-params.path_loss_exponent);
        for i in 0..near_stats.dim() {
            let near_beta = near_stats.mean()[i].norm_sqr() + near_stats.variance()[i];
            let far_beta = far_stats.mean()[i].norm_sqr() + far_stats.variance()[i];
            assert!((far_beta / near_beta - scale).abs() < 1e-12);
        }
    }

    #[test]
    fn receiver_on_pinch_is_singular() {
        let (mut geom, params) = default_setup();
        geom.receiver = [1.5, 9.75, 3.0];
        assert!(matches!(channel_stats(&geom, &params), Err(Error::Singularity(_))));
    }

    #[test]
    fn zero_variance_sampling_returns_mean() {
        let (geom, mut params) = default_setup();
        params.rician_factor = 1e30;
        let stats = channel_stats(&geom, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = sample_channel(&stats, &mut rng);
        for (c, mu) in h.coefficients().iter().zip(stats.mean()) {
            assert!((c - mu).norm() < 1e-12);
        }
    }

    #[test]
    fn sample_moments_match_stats() {
        let (geom, params) = default_setup();
        let stats = channel_stats(&geom, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000usize;
        let dim = stats.dim();
        let mut sum = vec![Complex64::new(0.0, 0.0); dim];
        let mut sum_sq = vec![0.0f64; dim];
        for _ in 0..n {
            let h = sample_channel(&stats, &mut rng);
            for (i, c) in h.coefficients().iter().enumerate() {
                sum[i] += c;
                sum_sq[i] += (c - stats.mean()[i]).norm_sqr();
            }
        }
        for i in 0..dim {
            let emp_mean = sum[i] / n as f64;
            let emp_var = sum_sq[i] / n as f64;
            // component standard error of the complex mean
            let se = (stats.variance()[i] / n as f64).sqrt();
            assert!(
                (emp_mean - stats.mean()[i]).norm() < 4.0 * se,
                "component {i} mean off: {emp_mean} vs {}",
                stats.mean()[i]
            );
            assert!(
                (emp_var / stats.variance()[i] - 1.0).abs() < 0.05,
                "component {i} variance off by more than 5%"
            );
        }
    }
}
