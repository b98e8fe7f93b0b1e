//! Semi-analytical BER upper bound and diversity verification.
//!
//! The pairwise error probability is averaged over the fading by expressing
//! the Gaussian Q-function through its finite-range integral form and
//! evaluating the MGF of the Hermitian quadratic form `g^H A_ij g` at
//! `xi(theta) = 1/(8 N0 sin^2 theta)`. The remaining expectation over the
//! differential state is a sample average over products of random codewords.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelStats;
use crate::codebook::{Codebook, Codeword};
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// Relative threshold below which an eigenvalue counts as zero.
const RANK_TOL: f64 = 1e-9;

/// Difference matrix and Gram of one codeword pair.
#[derive(Debug, Clone)]
pub struct PairGram {
    delta: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
    rank: usize,
}

impl PairGram {
    /// Builds `A = Delta^H Delta` and its numerical rank from a difference
    /// matrix.
    pub fn from_delta(delta: DMatrix<Complex64>) -> Self {
        let gram = delta.adjoint() * &delta;
        let rank = gram_rank(&gram);
        Self { delta, gram, rank }
    }

    pub fn delta(&self) -> &DMatrix<Complex64> {
        &self.delta
    }

    /// Hermitian positive semidefinite Gram matrix.
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

fn gram_rank(gram: &DMatrix<Complex64>) -> usize {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        0
    } else {
        eig.eigenvalues.iter().filter(|&&l| l > RANK_TOL * max).count()
    }
}

/// Gram of the difference between two codewords.
pub fn difference_gram(qi: &Codeword, qj: &Codeword) -> PairGram {
    assert_eq!(
        qi.matrix().shape(),
        qj.matrix().shape(),
        "codeword dimensions must agree"
    );
    PairGram::from_delta(qi.matrix() - qj.matrix())
}

/// Numerical knobs of the semi-analytical bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    /// Gauss-Legendre nodes on (0, pi/2).
    pub quad_nodes: usize,
    /// Differential-state samples for the outer expectation.
    pub num_past_states: usize,
    /// Codeword factors per sampled state.
    pub past_depth: usize,
    /// Evaluate only this many uniformly drawn ordered pairs (with unbiased
    /// rescaling); `None` runs every pair.
    pub pair_subsample: Option<usize>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { quad_nodes: 64, num_past_states: 200, past_depth: 8, pair_subsample: None }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_nodes < 8 {
            return Err(Error::Config("need at least 8 quadrature nodes".into()));
        }
        if self.num_past_states < 1 {
            return Err(Error::Config("need at least one past-state sample".into()));
        }
        if self.pair_subsample == Some(0) {
            return Err(Error::Config("pair subsample must be positive".into()));
        }
        Ok(())
    }
}

/// Nonzero eigenvalues of the whitened Gram
/// `B = Sigma_g^(1/2) A Sigma_g^(1/2)`, sorted descending.
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
}

impl EigenSpectrum {
    pub fn compute(x_prev: &DMatrix<Complex64>, stats: &ChannelStats, pair: &PairGram) -> Self {
        let c = whitened_gram(x_prev, stats, pair.gram());
        let eig = SymmetricEigen::new(c);
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let mut eigenvalues: Vec<f64> = eig
            .eigenvalues
            .iter()
            .cloned()
            .filter(|&l| max > 0.0 && l > RANK_TOL * max)
            .collect();
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Self { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// `C = Sigma^(1/2) (X^H A X) Sigma^(1/2)`; unitarily similar to `B`, so it
/// shares the spectrum while keeping the diagonal scaling explicit.
fn whitened_gram(
    x_prev: &DMatrix<Complex64>,
    stats: &ChannelStats,
    gram: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let d = x_prev.adjoint() * gram * x_prev;
    let t = stats.dim();
    let s: Vec<f64> = stats.variance().iter().map(|&v| v.sqrt()).collect();
    DMatrix::from_fn(t, t, |i, j| s[i] * s[j] * d[(i, j)])
}

/// MGF of the noncentral Hermitian quadratic form `Z = g^H A g`,
/// `g ~ CN(mu_g, Sigma_g)`, as a function of the exponent scale `s`:
/// `exp(-s mu^H A (I + s Sigma A)^(-1) mu) / det(I + s Sigma A)`,
/// computed through an LU factorization.
pub fn conditional_mgf(
    s: f64,
    mu_g: &DVector<Complex64>,
    sigma_g: &DMatrix<Complex64>,
    gram: &DMatrix<Complex64>,
) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Domain(format!("exponent scale must be nonnegative, got {s}")));
    }
    let t = mu_g.len();
    let m = DMatrix::<Complex64>::identity(t, t) + sigma_g * gram * Complex64::new(s, 0.0);
    let norm = crate::util::max_abs(&m);
    let lu = m.lu();
    let det = lu.determinant();
    if !det.norm().is_finite() || det.norm() < 1e-300 {
        return Err(Error::Numerical(format!(
            "I + s*Sigma*A singular at s = {s:.6e} (|det| = {:.3e}, max entry {norm:.3e})",
            det.norm()
        )));
    }
    let x = lu.solve(mu_g).ok_or_else(|| {
        Error::Numerical(format!("LU solve failed at s = {s:.6e} (max entry {norm:.3e})"))
    })?;
    let quad_form = (mu_g.adjoint() * gram * x)[(0, 0)];
    Ok(((-s * quad_form).exp() / det).re)
}

fn xi(theta: f64, n0: f64) -> f64 {
    1.0 / (8.0 * n0 * theta.sin().powi(2))
}

/// Per-(N0, stats) state of the PEP quadrature, reused across pairs.
struct PepKernel {
    sqrt_var: Vec<f64>,
    /// `Sigma^(-1/2) mu` when every variance is positive.
    whitened_mean: Option<DVector<Complex64>>,
    mean: DVector<Complex64>,
    covariance: DMatrix<Complex64>,
    xi_nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PepKernel {
    fn new(stats: &ChannelStats, n0: f64, quad_nodes: usize) -> Result<Self> {
        if n0 <= 0.0 {
            return Err(Error::Domain(format!("noise density must be positive, got {n0}")));
        }
        let rule = GaussLegendre::new(quad_nodes, 0.0, std::f64::consts::FRAC_PI_2);
        let xi_nodes: Vec<f64> = rule.nodes().iter().map(|&t| xi(t, n0)).collect();
        let weights = rule.weights().to_vec();
        let sqrt_var: Vec<f64> = stats.variance().iter().map(|&v| v.sqrt()).collect();
        let mean = stats.mean_vector();
        let whitened_mean = if stats.variance().iter().all(|&v| v > 0.0) {
            Some(DVector::from_iterator(
                stats.dim(),
                mean.iter().zip(&sqrt_var).map(|(&m, &s)| m / s),
            ))
        } else {
            None
        };
        Ok(Self {
            sqrt_var,
            whitened_mean,
            mean,
            covariance: stats.covariance_matrix(),
            xi_nodes,
            weights,
        })
    }

    /// `(1/pi) Int MGF(xi(theta)) d theta` for one differential state.
    ///
    /// With positive variances the integrand collapses onto the spectrum of
    /// the whitened Gram: one Hermitian eigendecomposition per state, then a
    /// few flops per node. Otherwise falls back to the LU form per node.
    fn pep_for_state(&self, x_prev: &DMatrix<Complex64>, gram: &DMatrix<Complex64>) -> Result<f64> {
        let t = self.mean.len();
        if let Some(v0) = &self.whitened_mean {
            let d = x_prev.adjoint() * gram * x_prev;
            let c = DMatrix::from_fn(t, t, |i, j| {
                self.sqrt_var[i] * self.sqrt_var[j] * d[(i, j)]
            });
            let eig = SymmetricEigen::new(c);
            let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            let d_mu = &d * &self.mean;
            let w0 = DVector::from_iterator(
                t,
                d_mu.iter().zip(&self.sqrt_var).map(|(&x, &s)| x * s),
            );
            let wt = eig.eigenvectors.adjoint() * w0;
            let vt = eig.eigenvectors.adjoint() * v0;
            // node-independent cross terms of the exponent
            let cross: Vec<Complex64> =
                wt.iter().zip(vt.iter()).map(|(&w, &v)| w.conj() * v).collect();
            let mut acc = 0.0;
            for (&s, &w) in self.xi_nodes.iter().zip(&self.weights) {
                let mut det = 1.0;
                let mut expo = Complex64::new(0.0, 0.0);
                for (&l, &x) in lambda.iter().zip(&cross) {
                    let denom = 1.0 + s * l;
                    det *= denom;
                    expo += x / denom;
                }
                acc += w * (-s * expo.re).exp() / det;
            }
            Ok(acc / std::f64::consts::PI)
        } else {
            let mu_g = x_prev * &self.mean;
            let sigma_g = x_prev * &self.covariance * x_prev.adjoint();
            let mut acc = 0.0;
            for (&s, &w) in self.xi_nodes.iter().zip(&self.weights) {
                acc += w * conditional_mgf(s, &mu_g, &sigma_g, gram)?;
            }
            Ok(acc / std::f64::consts::PI)
        }
    }
}

/// Conditional averaged PEP for a fixed differential state; lies in
/// `(0, 1/2]`.
pub fn conditional_pep(
    x_prev: &DMatrix<Complex64>,
    stats: &ChannelStats,
    pair: &PairGram,
    n0: f64,
    cfg: &BoundConfig,
) -> Result<f64> {
    cfg.validate()?;
    PepKernel::new(stats, n0, cfg.quad_nodes)?.pep_for_state(x_prev, pair.gram())
}

/// Uniformly random product of `depth` codewords starting from the identity.
pub fn sample_past_state<R: Rng + ?Sized>(
    codebook: &Codebook,
    depth: usize,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let t = codebook.config().block_len();
    let mut state = DMatrix::<Complex64>::identity(t, t);
    for _ in 0..depth {
        let label = rng.random_range(0..codebook.len() as u64);
        state = codebook.codeword(label).matrix() * state;
    }
    state
}

/// Unconditional PEP of mistaking codeword `i` for `j`: the conditional PEP
/// averaged over sampled differential states.
pub fn average_pep<R: Rng + ?Sized>(
    codebook: &Codebook,
    label_i: u64,
    label_j: u64,
    stats: &ChannelStats,
    n0: f64,
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<f64> {
    average_pep_detailed(codebook, label_i, label_j, stats, n0, cfg, rng).map(|(mean, _)| mean)
}

/// Like [`average_pep`] but also reports the standard error of the
/// state-sampling mean.
pub fn average_pep_detailed<R: Rng + ?Sized>(
    codebook: &Codebook,
    label_i: u64,
    label_j: u64,
    stats: &ChannelStats,
    n0: f64,
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if label_i == label_j {
        return Err(Error::Domain("pairwise error needs two distinct codewords".into()));
    }
    let pair = difference_gram(codebook.codeword(label_i), codebook.codeword(label_j));
    let kernel = PepKernel::new(stats, n0, cfg.quad_nodes)?;
    let n = cfg.num_past_states;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let state = sample_past_state(codebook, cfg.past_depth, rng);
        let p = kernel.pep_for_state(&state, pair.gram())?;
        sum += p;
        sum_sq += p * p;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let std_err = if n > 1 { (var / (n as f64 - 1.0)).sqrt() } else { 0.0 };
    Ok((mean, std_err))
}

/// Per-pair record emitted by the detailed bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDiagnostic {
    pub label_i: u64,
    pub label_j: u64,
    pub rank: usize,
    pub pep: f64,
}

/// Union bound on the average BER:
/// `(1/(2^B B)) Sum_i Sum_j N(b_i, b_j) Pr(Q_i -> Q_j)`.
///
/// Differential states are sampled once and shared across pairs, and pairs
/// with identical Gram matrices share one PEP evaluation; both choices keep
/// the result deterministic for a fixed seed.
pub fn ber_union_bound<R: Rng + ?Sized>(
    codebook: &Codebook,
    stats: &ChannelStats,
    n0: f64,
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<f64> {
    ber_union_bound_detailed(codebook, stats, n0, cfg, rng, false).map(|(b, _)| b)
}

/// Union bound plus per-pair diagnostics (when `collect_diagnostics`).
pub fn ber_union_bound_detailed<R: Rng + ?Sized>(
    codebook: &Codebook,
    stats: &ChannelStats,
    n0: f64,
    cfg: &BoundConfig,
    rng: &mut R,
    collect_diagnostics: bool,
) -> Result<(f64, Vec<PairDiagnostic>)> {
    cfg.validate()?;
    let size = codebook.len() as u64;
    if size < 2 {
        return Err(Error::Domain("union bound needs at least two codewords".into()));
    }
    let kernel = PepKernel::new(stats, n0, cfg.quad_nodes)?;
    let states: Vec<DMatrix<Complex64>> = (0..cfg.num_past_states)
        .map(|_| sample_past_state(codebook, cfg.past_depth, rng))
        .collect();

    // ordered pairs to evaluate, with the factor rescaling the partial sum
    // back to the full double sum
    let (pairs, scale): (Vec<(u64, u64)>, f64) = match cfg.pair_subsample {
        Some(k) if (k as u64) < size * (size - 1) => {
            let sampled: Vec<(u64, u64)> = (0..k)
                .map(|_| {
                    let i = rng.random_range(0..size);
                    let mut j = rng.random_range(0..size - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i, j)
                })
                .collect();
            let total = (size * (size - 1)) as f64;
            (sampled, total / k as f64)
        }
        _ => {
            // exhaustive: unordered pairs, each standing for both orders
            let mut all = Vec::with_capacity((size * (size - 1) / 2) as usize);
            for i in 0..size {
                for j in (i + 1)..size {
                    all.push((i, j));
                }
            }
            (all, 2.0)
        }
    };

    // group pairs by (verified) identical Gram matrices
    let mut group_of_pair: Vec<usize> = Vec::with_capacity(pairs.len());
    let mut group_grams: Vec<DMatrix<Complex64>> = Vec::new();
    let mut group_ranks: Vec<usize> = Vec::new();
    let mut index: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for &(i, j) in &pairs {
        let delta = codebook.codeword(i).matrix() - codebook.codeword(j).matrix();
        let gram = delta.adjoint() * &delta;
        let key = gram_key(&gram);
        let bucket = index.entry(key).or_default();
        let found = bucket
            .iter()
            .copied()
            .find(|&g| crate::util::max_abs(&(&group_grams[g] - &gram)) < 1e-10);
        let gid = match found {
            Some(g) => g,
            None => {
                let g = group_grams.len();
                group_grams.push(gram);
                group_ranks.push(usize::MAX); // filled lazily below
                bucket.push(g);
                g
            }
        };
        group_of_pair.push(gid);
    }

    // one averaged PEP per distinct Gram
    let group_peps: Vec<Result<f64>> = group_grams
        .par_iter()
        .map(|gram| {
            let mut sum = 0.0;
            for state in &states {
                sum += kernel.pep_for_state(state, gram)?;
            }
            Ok(sum / states.len() as f64)
        })
        .collect();
    let group_peps: Vec<f64> = group_peps.into_iter().collect::<Result<_>>()?;

    let total_bits = codebook.config().total_bits() as f64;
    let mut weighted = 0.0;
    let mut diagnostics = Vec::new();
    for (&(i, j), &gid) in pairs.iter().zip(&group_of_pair) {
        let pep = group_peps[gid];
        let errors = crate::bits::hamming(i, j) as f64;
        weighted += errors * pep;
        if collect_diagnostics {
            if group_ranks[gid] == usize::MAX {
                group_ranks[gid] = gram_rank(&group_grams[gid]);
            }
            diagnostics.push(PairDiagnostic {
                label_i: i,
                label_j: j,
                rank: group_ranks[gid],
                pep,
            });
        }
    }
    let bound = scale * weighted / (size as f64 * total_bits);
    Ok((bound, diagnostics))
}

fn gram_key(gram: &DMatrix<Complex64>) -> Vec<u64> {
    // quantized fingerprint; exact equality is re-verified on lookup
    let mut key = Vec::with_capacity(2 * gram.len());
    for v in gram.iter() {
        key.push((v.re * 1e9).round().to_bits());
        key.push((v.im * 1e9).round().to_bits());
    }
    key
}

/// Minimum numerical rank of `Q_i - Q_j` over all distinct codeword pairs;
/// equals the diversity order of the scheme.
pub fn min_rank_difference(codebook: &Codebook) -> Result<usize> {
    let matrices: Vec<&DMatrix<Complex64>> =
        codebook.codewords().iter().map(|c| c.matrix()).collect();
    min_rank_over(&matrices)
}

/// [`min_rank_difference`] over an explicit matrix set.
pub fn min_rank_over(matrices: &[&DMatrix<Complex64>]) -> Result<usize> {
    if matrices.len() < 2 {
        return Err(Error::Domain("need at least two codewords to compare".into()));
    }
    let n = matrices.len();
    let min = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| PairGram::from_delta(matrices[i] - matrices[j]).rank())
                .min()
                .unwrap()
        })
        .min()
        .unwrap();
    if min == 0 {
        return Err(Error::Domain("codebook contains duplicate codewords".into()));
    }
    Ok(min)
}

/// Least-squares diversity estimate: negated slope of `log10(BER)` against
/// `Eb/N0(dB)/10` over the points inside `window` with positive BER.
pub fn estimate_diversity_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let filtered: Vec<(f64, f64)> = points
        .iter()
        .filter(|(snr, ber)| *ber > 0.0 && *snr >= window.0 && *snr <= window.1)
        .map(|&(snr, ber)| (snr / 10.0, ber.log10()))
        .collect();
    if filtered.len() < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 positive-BER points in window, found {}",
            filtered.len()
        )));
    }
    let n = filtered.len() as f64;
    let mean_x = filtered.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = filtered.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = filtered.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = filtered.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all points share one SNR; slope undefined".into()));
    }
    Ok(-sxy / sxx)
}
