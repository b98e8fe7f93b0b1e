//! Differential transmitter, AWGN application, and maximum-likelihood
//! detection (noncoherent differential and coherent perfect-CSI baseline).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{standard_complex_gaussian, ChannelRealization};
use crate::codebook::{Codebook, CodebookConfig, Codeword, SubblockKind};
use crate::error::{Error, Result};

/// Converts a per-bit SNR in dB to the noise spectral density under the
/// unit-column-energy convention: block energy `T`, bits per block `B`,
/// so `N0 = (T/B) * 10^(-ebn0_db/10)`.
pub fn ebn0_to_n0(ebn0_db: f64, cfg: &CodebookConfig) -> f64 {
    let t = cfg.block_len() as f64;
    let b = cfg.total_bits() as f64;
    (t / b) * 10f64.powf(-ebn0_db / 10.0)
}

/// Operating point of one BER measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePlan {
    pub ebn0_db: f64,
    pub n0: f64,
    pub bits_per_block: usize,
    pub block_len: usize,
}

impl NoisePlan {
    pub fn new(ebn0_db: f64, cfg: &CodebookConfig) -> Self {
        Self {
            ebn0_db,
            n0: ebn0_to_n0(ebn0_db, cfg),
            bits_per_block: cfg.total_bits(),
            block_len: cfg.block_len(),
        }
    }
}

/// A differentially encoded frame: reference matrix plus one transmit matrix
/// per data codeword.
#[derive(Debug, Clone)]
pub struct Frame {
    matrices: Vec<DMatrix<Complex64>>,
    labels: Vec<u64>,
}

impl Frame {
    /// Transmitted matrices `X_0..X_K` (`X_0` is the identity reference).
    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    /// Bit labels of the data codewords, one per block `k >= 1`.
    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn num_data_blocks(&self) -> usize {
        self.labels.len()
    }

    /// Worst deviation of any `X_k^H X_k` from the identity.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|x| {
                let t = x.nrows();
                crate::util::max_abs(&(x.adjoint() * x - DMatrix::<Complex64>::identity(t, t)))
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the differential recursion `X_k = Q_k X_{k-1}` from `X_0 = I`.
/// No re-orthonormalization is applied; accumulated drift is checked against
/// a `1e-6` guard.
pub fn differential_encode(codewords: &[&Codeword]) -> Result<Frame> {
    let Some(first) = codewords.first() else {
        return Err(Error::Config("differential frame needs at least one codeword".into()));
    };
    let t = first.matrix().nrows();
    let mut matrices = Vec::with_capacity(codewords.len() + 1);
    matrices.push(DMatrix::<Complex64>::identity(t, t));
    let mut labels = Vec::with_capacity(codewords.len());
    for cw in codewords {
        if cw.matrix().nrows() != t {
            return Err(Error::Config("codeword dimensions differ within a frame".into()));
        }
        let next = cw.matrix() * matrices.last().unwrap();
        matrices.push(next);
        labels.push(cw.label());
    }
    let last = matrices.last().unwrap();
    let defect = crate::util::max_abs(&(last.adjoint() * last - DMatrix::<Complex64>::identity(t, t)));
    if defect >= 1e-6 {
        return Err(Error::Numerical(format!(
            "unitarity drift {defect:.3e} after {} blocks exceeds guard",
            codewords.len()
        )));
    }
    Ok(Frame { matrices, labels })
}

/// One received vector `y = X h + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    samples: Vec<Complex64>,
}

impl ReceivedBlock {
    pub fn from_samples(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.samples)
    }
}

/// Applies the channel and additive noise: `y = X h + n`, noise
/// circularly-symmetric with per-component variance `n0`.
pub fn transmit_block<R: Rng + ?Sized>(
    x: &DMatrix<Complex64>,
    h: &ChannelRealization,
    n0: f64,
    rng: &mut R,
) -> ReceivedBlock {
    let clean = x * h.as_vector();
    let sigma = n0.sqrt();
    let samples = clean
        .iter()
        .map(|&c| c + sigma * standard_complex_gaussian(rng))
        .collect();
    ReceivedBlock { samples }
}

/// Outcome of one ML decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    /// Bit label of the selected codeword.
    pub label: u64,
    /// Value of the minimized metric.
    pub metric: f64,
}

impl DetectionResult {
    /// Number of bit errors against the true label.
    pub fn bit_errors(&self, truth: u64) -> u32 {
        (self.label ^ truth).count_ones()
    }

    /// Per-bit correctness mask (MSB first), `true` marking a correct bit.
    pub fn bit_correct_mask(&self, truth: u64, width: usize) -> Vec<bool> {
        (0..width)
            .rev()
            .map(|i| ((self.label ^ truth) >> i) & 1 == 0)
            .collect()
    }
}

/// Structured ML engine for one codebook.
///
/// Exploits the product structure of the signal space: the metric
/// `||y - Q r||^2` decomposes over subblocks, so the search runs over
/// `L^2 M^2` subblock costs plus the permutation list instead of all `2^B`
/// matrices. Results (including the lowest-label tie rule) match the
/// exhaustive scan.
#[derive(Debug, Clone)]
pub struct FastCodebook {
    num_subblocks: usize,
    bits_per_symbol: usize,
    index_bits: usize,
    kind: SubblockKind,
    /// Constellation point for each MSB-first bit pattern.
    symbols: Vec<Complex64>,
    /// Subblock-to-position maps in rank order.
    patterns: Vec<Vec<usize>>,
    /// Scratch: per (subblock, position) best cost and symbol-pair bits.
    cost: Vec<f64>,
    pair: Vec<u32>,
}

impl FastCodebook {
    pub fn new(codebook: &Codebook) -> Self {
        Self::from_parts(codebook.config(), codebook.kind())
    }

    pub fn from_parts(cfg: &CodebookConfig, kind: SubblockKind) -> Self {
        let m = cfg.modulation_order();
        let symbols = (0..m as u64)
            .map(|bits| {
                crate::codebook::psk_modulate(
                    &crate::bits::index_to_bits(bits, cfg.bits_per_symbol()),
                    m,
                )
                .expect("valid constellation")
                .value()
            })
            .collect();
        let patterns = (0..(1u64 << cfg.index_bits()))
            .map(|rank| {
                crate::codebook::index_to_permutation(rank, cfg.num_subblocks())
                    .expect("rank within codebook")
                    .sigma()
                    .to_vec()
            })
            .collect();
        let l = cfg.num_subblocks();
        Self {
            num_subblocks: l,
            bits_per_symbol: cfg.bits_per_symbol(),
            index_bits: cfg.index_bits(),
            kind,
            symbols,
            patterns,
            cost: vec![0.0; l * l],
            pair: vec![0; l * l],
        }
    }

    pub fn block_len(&self) -> usize {
        2 * self.num_subblocks
    }

    /// Applies the codeword with the given label to a state vector:
    /// `out = Q z`. Output block `l` is `G_l` applied to input block
    /// `sigma(l)`.
    pub fn apply_codeword(&self, label: u64, z: &[Complex64], out: &mut [Complex64]) {
        let rank = (label & ((1 << self.index_bits) - 1)) as usize;
        let mod_val = label >> self.index_bits;
        let sigma = &self.patterns[rank];
        let pair_width = 2 * self.bits_per_symbol;
        let mask = (1u64 << self.bits_per_symbol) - 1;
        for l in 0..self.num_subblocks {
            let shift = pair_width * (self.num_subblocks - 1 - l);
            let pair = (mod_val >> shift) & ((1 << pair_width) - 1);
            let sa = self.symbols[(pair >> self.bits_per_symbol) as usize];
            let sb = self.symbols[(pair & mask) as usize];
            let src = 2 * sigma[l];
            let (v1, v2) = (z[src], z[src + 1]);
            match self.kind {
                SubblockKind::Alamouti => {
                    let w = std::f64::consts::FRAC_1_SQRT_2;
                    out[2 * l] = w * (sa * v1 + sb * v2);
                    out[2 * l + 1] = w * (sa.conj() * v2 - sb.conj() * v1);
                }
                SubblockKind::Diagonal => {
                    out[2 * l] = sa * v1;
                    out[2 * l + 1] = sb * v2;
                }
            }
        }
    }

    /// ML decision of `argmin_Q ||y - Q r||^2` with lowest-label tie-break.
    pub fn detect(&mut self, y: &[Complex64], reference: &[Complex64]) -> DetectionResult {
        let l = self.num_subblocks;
        let m = self.symbols.len();
        let w = std::f64::consts::FRAC_1_SQRT_2;
        for lb in 0..l {
            let (y1, y2) = (y[2 * lb], y[2 * lb + 1]);
            for mb in 0..l {
                let (v1, v2) = (reference[2 * mb], reference[2 * mb + 1]);
                let mut best = f64::INFINITY;
                let mut best_pair = 0u32;
                for a in 0..m {
                    let sa = self.symbols[a];
                    for b in 0..m {
                        let sb = self.symbols[b];
                        let c = match self.kind {
                            SubblockKind::Alamouti => {
                                let o1 = w * (sa * v1 + sb * v2);
                                let o2 = w * (sa.conj() * v2 - sb.conj() * v1);
                                (y1 - o1).norm_sqr() + (y2 - o2).norm_sqr()
                            }
                            SubblockKind::Diagonal => {
                                (y1 - sa * v1).norm_sqr() + (y2 - sb * v2).norm_sqr()
                            }
                        };
                        if c < best {
                            best = c;
                            best_pair = ((a << self.bits_per_symbol) | b) as u32;
                        }
                    }
                }
                self.cost[lb * l + mb] = best;
                self.pair[lb * l + mb] = best_pair;
            }
        }
        let mut best_metric = f64::INFINITY;
        let mut best_label = u64::MAX;
        for (rank, sigma) in self.patterns.iter().enumerate() {
            let mut total = 0.0;
            for lb in 0..l {
                total += self.cost[lb * l + sigma[lb]];
            }
            if total < best_metric || (total == best_metric && {
                let label = self.assemble_label(rank, sigma);
                label < best_label
            }) {
                best_metric = total;
                best_label = self.assemble_label(rank, sigma);
            }
        }
        DetectionResult { label: best_label, metric: best_metric }
    }

    fn assemble_label(&self, rank: usize, sigma: &[usize]) -> u64 {
        let l = self.num_subblocks;
        let mut mod_val = 0u64;
        for lb in 0..l {
            mod_val = (mod_val << (2 * self.bits_per_symbol)) | u64::from(self.pair[lb * l + sigma[lb]]);
        }
        (mod_val << self.index_bits) | rank as u64
    }
}

/// Noncoherent differential ML detection from two consecutive received
/// blocks; never reads the channel.
pub fn detect_differential_ml(
    y_k: &ReceivedBlock,
    y_prev: &ReceivedBlock,
    codebook: &Codebook,
) -> DetectionResult {
    FastCodebook::new(codebook).detect(y_k.samples(), y_prev.samples())
}

/// Coherent ML detection with perfect CSI for the non-differential baseline
/// (`X_k = Q_k`).
pub fn detect_coherent_ml(
    y_k: &ReceivedBlock,
    h: &ChannelRealization,
    codebook: &Codebook,
) -> DetectionResult {
    FastCodebook::new(codebook).detect(y_k.samples(), h.coefficients())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_stats, sample_channel, ChannelParams, Geometry};
    use crate::codebook::{build_no_alamouti_codebook, enumerate_codebook};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_book() -> Codebook {
        enumerate_codebook(&CodebookConfig::new(2, 3).unwrap()).unwrap()
    }

    fn default_channel(rng: &mut ChaCha8Rng) -> ChannelRealization {
        let geom = Geometry::default_deployment(vec![1.5, 7.5, 18.5]);
        let stats = channel_stats(&geom, &ChannelParams::default()).unwrap();
        sample_channel(&stats, rng)
    }

    /// Exhaustive metric scan used as the independent oracle.
    fn brute_force_detect(
        y: &[Complex64],
        reference: &[Complex64],
        codebook: &Codebook,
    ) -> DetectionResult {
        let yv = DVector::from_column_slice(y);
        let rv = DVector::from_column_slice(reference);
        let mut best = DetectionResult { label: u64::MAX, metric: f64::INFINITY };
        for cw in codebook.codewords() {
            let metric = (&yv - cw.matrix() * &rv).norm_squared();
            if metric < best.metric || (metric == best.metric && cw.label() < best.label) {
                best = DetectionResult { label: cw.label(), metric };
            }
        }
        best
    }

    #[test]
    fn ebn0_conversion_examples() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        assert!((ebn0_to_n0(0.0, &cfg) - 0.75).abs() < 1e-15);
        assert!((ebn0_to_n0(10.0, &cfg) - 0.075).abs() < 1e-15);
        // a Delta-dB shift scales N0 by exactly 10^(-Delta/10)
        for e in [-3.0, 0.0, 7.5, 21.0] {
            let ratio = ebn0_to_n0(e + 6.0, &cfg) / ebn0_to_n0(e, &cfg);
            assert!((ratio - 10f64.powf(-0.6)).abs() < 1e-15);
        }
    }

    #[test]
    fn frame_recursion_matches_definition() {
        let book = default_book();
        let q = book.codeword(37);
        let frame = differential_encode(&[q]).unwrap();
        assert_eq!(frame.matrices().len(), 2);
        assert!(crate::util::max_abs(&(&frame.matrices()[0] - DMatrix::<Complex64>::identity(6, 6))) < 1e-15);
        assert!(crate::util::max_abs(&(&frame.matrices()[1] - q.matrix())) < 1e-15);

        // identity codeword keeps the state at identity
        let id = book.codeword(0);
        // label 0 is NOT the identity matrix (it is the all-ones Alamouti
        // block-diagonal), so check the recursion directly instead
        let frame = differential_encode(&[id, id]).unwrap();
        let expect = id.matrix() * id.matrix();
        assert!(crate::util::max_abs(&(&frame.matrices()[2] - expect)) < 1e-12);
        assert_eq!(frame.labels(), &[0, 0]);
    }

    #[test]
    fn hundred_block_frame_stays_unitary() {
        let book = default_book();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<u64> = (0..100).map(|_| rng.random_range(0..book.len() as u64)).collect();
        let cws: Vec<&Codeword> = labels.iter().map(|&l| book.codeword(l)).collect();
        let frame = differential_encode(&cws).unwrap();
        assert_eq!(frame.num_data_blocks(), 100);
        assert!(frame.max_unitarity_defect() < 1e-9);
    }

    #[test]
    fn transmit_block_noiseless_and_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = default_channel(&mut rng);
        let id = DMatrix::<Complex64>::identity(6, 6);
        let y = transmit_block(&id, &h, 0.0, &mut rng);
        for (a, b) in y.samples().iter().zip(h.coefficients()) {
            assert!((a - b).norm() < 1e-15);
        }

        let n0 = 0.37;
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = transmit_block(&id, &h, n0, &mut rng);
            acc += (y.samples()[0] - h.coefficients()[0]).norm_sqr();
        }
        let emp = acc / trials as f64;
        assert!((emp / n0 - 1.0).abs() < 0.03, "empirical noise variance {emp} vs {n0}");
    }

    #[test]
    fn equivalent_noise_has_doubled_variance_and_no_cross_correlation() {
        let book = default_book();
        let q = book.codeword(123).matrix();
        let n0: f64 = 0.25;
        let sigma = n0.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 100_000;
        let t = 6;
        let mut var = vec![0.0f64; t];
        let mut cross = Complex64::new(0.0, 0.0);
        for _ in 0..trials {
            let nk: Vec<Complex64> =
                (0..t).map(|_| sigma * standard_complex_gaussian(&mut rng)).collect();
            let nprev = DVector::from_iterator(
                t,
                (0..t).map(|_| sigma * standard_complex_gaussian(&mut rng)),
            );
            let eq = DVector::from_column_slice(&nk) - q * nprev;
            for i in 0..t {
                var[i] += eq[i].norm_sqr();
            }
            cross += eq[0] * eq[3].conj();
        }
        for v in var {
            let emp = v / trials as f64;
            assert!((emp / (2.0 * n0) - 1.0).abs() < 0.02, "equivalent variance {emp}");
        }
        assert!((cross / trials as f64).norm() < 0.01 * n0);
    }

    #[test]
    fn noiseless_differential_detection_is_exact() {
        let book = default_book();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = default_channel(&mut rng);
        let mut fast = FastCodebook::new(&book);
        let mut z_prev: Vec<Complex64> = h.coefficients().to_vec();
        let mut z = vec![Complex64::new(0.0, 0.0); 6];
        for label in [0u64, 1, 17, 255, 128, 200] {
            fast.apply_codeword(label, &z_prev, &mut z);
            let got = fast.detect(&z, &z_prev);
            assert_eq!(got.label, label);
            assert!(got.metric < 1e-20);
            z_prev.copy_from_slice(&z);
        }
    }

    #[test]
    fn apply_codeword_matches_matrix_product() {
        for book in [default_book(), build_no_alamouti_codebook(&CodebookConfig::new(4, 2).unwrap()).unwrap()] {
            let fast0 = FastCodebook::new(&book);
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let t = book.config().block_len();
            let z: Vec<Complex64> =
                (0..t).map(|_| standard_complex_gaussian(&mut rng)).collect();
            let mut out = vec![Complex64::new(0.0, 0.0); t];
            for label in (0..book.len() as u64).step_by(7) {
                fast0.apply_codeword(label, &z, &mut out);
                let direct = book.codeword(label).matrix() * DVector::from_column_slice(&z);
                for i in 0..t {
                    assert!((out[i] - direct[i]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn detector_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for book in [default_book(), build_no_alamouti_codebook(&CodebookConfig::new(2, 3).unwrap()).unwrap()] {
            let mut fast = FastCodebook::new(&book);
            for _ in 0..1000 {
                let h = default_channel(&mut rng);
                let label = rng.random_range(0..book.len() as u64);
                let n0: f64 = 0.2;
                let sigma = n0.sqrt();
                let y_prev: Vec<Complex64> = h
                    .coefficients()
                    .iter()
                    .map(|&c| c + sigma * standard_complex_gaussian(&mut rng))
                    .collect();
                let mut clean = vec![Complex64::new(0.0, 0.0); 6];
                fast.apply_codeword(label, h.coefficients(), &mut clean);
                let y: Vec<Complex64> = clean
                    .iter()
                    .map(|&c| c + sigma * standard_complex_gaussian(&mut rng))
                    .collect();
                let got = fast.detect(&y, &y_prev);
                let oracle = brute_force_detect(&y, &y_prev, &book);
                assert_eq!(got.label, oracle.label);
                assert!((got.metric - oracle.metric).abs() < 1e-9 * (1.0 + oracle.metric));
            }
        }
    }

    #[test]
    fn coherent_detection_noiseless_and_oracle() {
        let book = default_book();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = default_channel(&mut rng);
        let cw = book.codeword(99);
        let y = transmit_block(cw.matrix(), &h, 0.0, &mut rng);
        let got = detect_coherent_ml(&y, &h, &book);
        assert_eq!(got.label, 99);

        let mut fast = FastCodebook::new(&book);
        for _ in 0..200 {
            let h = default_channel(&mut rng);
            let label = rng.random_range(0..book.len() as u64);
            let y = transmit_block(book.codeword(label).matrix(), &h, 0.1, &mut rng);
            let got = fast.detect(y.samples(), h.coefficients());
            let oracle = brute_force_detect(y.samples(), h.coefficients(), &book);
            assert_eq!(got.label, oracle.label);
        }
    }

    #[test]
    fn detection_invariant_to_common_phase() {
        let book = default_book();
        let mut fast = FastCodebook::new(&book);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let h = default_channel(&mut rng);
            let label = rng.random_range(0..256);
            let mut z = vec![Complex64::new(0.0, 0.0); 6];
            fast.apply_codeword(label, h.coefficients(), &mut z);
            let sigma = 0.15f64.sqrt();
            let y_prev: Vec<Complex64> = h
                .coefficients()
                .iter()
                .map(|&c| c + sigma * standard_complex_gaussian(&mut rng))
                .collect();
            let y: Vec<Complex64> =
                z.iter().map(|&c| c + sigma * standard_complex_gaussian(&mut rng)).collect();
            let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let y_rot: Vec<Complex64> = y.iter().map(|&c| phase * c).collect();
            let y_prev_rot: Vec<Complex64> = y_prev.iter().map(|&c| phase * c).collect();
            assert_eq!(fast.detect(&y, &y_prev).label, fast.detect(&y_rot, &y_prev_rot).label);
        }
    }

    #[test]
    fn bit_error_accounting() {
        let r = DetectionResult { label: 0b1010, metric: 0.0 };
        assert_eq!(r.bit_errors(0b1001), 2);
        assert_eq!(r.bit_correct_mask(0b1001, 4), vec![true, true, false, false]);
    }
}
