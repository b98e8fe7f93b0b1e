//! Signal-space construction: Gray-coded PSK, 2x2 Alamouti subblocks,
//! block-diagonal modulation matrices, permutation index modulation, and
//! exhaustive codeword enumeration with bijective bit labeling.
//!
//! A codeword is `Q = S * A` where `S = blkdiag(G_1, ..., G_L)` carries the
//! modulated symbols and `A` is a block permutation assigning subblock `l` to
//! pinching position `sigma(l)`. Row-block `l` of `Q` covers time slots
//! `2l, 2l+1`; column-block `m` covers the two waveguide elements pinched at
//! position `m`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::bits::{binary_to_gray, bits_to_index, exact_log2, gray_to_binary, index_to_bits};
use crate::error::{Error, Result};

/// Number of waveguides; the Alamouti pair structure fixes this at two.
pub const NUM_WAVEGUIDES: usize = 2;

/// Largest total bit count accepted for exhaustive enumeration.
pub const MAX_TOTAL_BITS: u32 = 20;

/// Static shape of the signal space: modulation order and pinching positions
/// per waveguide, with all derived bit budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookConfig {
    modulation_order: usize,
    num_positions: usize,
}

impl CodebookConfig {
    pub fn new(modulation_order: usize, num_positions: usize) -> Result<Self> {
        if modulation_order < 2 || exact_log2(modulation_order as u64).is_none() {
            return Err(Error::Config(format!(
                "modulation order must be a power of two >= 2, got {modulation_order}"
            )));
        }
        if num_positions < 1 || num_positions > 10 {
            // B >= 2*N_p, so anything past 10 positions can never pass the
            // enumeration guard
            return Err(Error::Config(format!(
                "number of pinching positions must be in 1..=10, got {num_positions}"
            )));
        }
        Ok(Self { modulation_order, num_positions })
    }

    pub fn modulation_order(&self) -> usize {
        self.modulation_order
    }

    /// Pinching positions per waveguide (`N_p`).
    pub fn num_positions(&self) -> usize {
        self.num_positions
    }

    /// Alamouti subblocks per codeword; equals the number of positions.
    pub fn num_subblocks(&self) -> usize {
        self.num_positions
    }

    /// Time slots per block: `T = 2 * N_p`.
    pub fn block_len(&self) -> usize {
        2 * self.num_positions
    }

    /// Bits per PSK symbol.
    pub fn bits_per_symbol(&self) -> usize {
        exact_log2(self.modulation_order as u64).unwrap() as usize
    }

    /// Modulation bits per block: `T * log2(M)`.
    pub fn mod_bits(&self) -> usize {
        self.block_len() * self.bits_per_symbol()
    }

    /// Index bits per block: `floor(log2(L!))`.
    pub fn index_bits(&self) -> usize {
        let l = self.num_subblocks() as u64;
        let fact: u64 = (1..=l).product::<u64>().max(1);
        63 - fact.leading_zeros() as usize
    }

    /// Total bits per block.
    pub fn total_bits(&self) -> usize {
        self.mod_bits() + self.index_bits()
    }

    /// Codebook cardinality `2^B`.
    pub fn codebook_size(&self) -> usize {
        1usize << self.total_bits()
    }
}

/// A unit-modulus PSK constellation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PskSymbol(Complex64);

impl PskSymbol {
    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// Maps an MSB-first bit word to a Gray-coded M-PSK symbol
/// `exp(j*2*pi*g/M)` with `g = gray_to_binary(bits)`.
pub fn psk_modulate(bits: &[bool], modulation_order: usize) -> Result<PskSymbol> {
    let Some(bits_per_symbol) = exact_log2(modulation_order as u64) else {
        return Err(Error::Config(format!(
            "modulation order must be a power of two, got {modulation_order}"
        )));
    };
    if modulation_order < 2 || bits.len() != bits_per_symbol as usize {
        return Err(Error::Config(format!(
            "expected {bits_per_symbol} bits for {modulation_order}-PSK, got {}",
            bits.len()
        )));
    }
    let g = gray_to_binary(bits_to_index(bits));
    Ok(psk_point(g as usize, modulation_order))
}

/// Recovers the bit word of a (noise-free) PSK symbol.
pub fn psk_demodulate(symbol: PskSymbol, modulation_order: usize) -> Result<Vec<bool>> {
    let Some(bits_per_symbol) = exact_log2(modulation_order as u64) else {
        return Err(Error::Config(format!(
            "modulation order must be a power of two, got {modulation_order}"
        )));
    };
    let m = modulation_order as f64;
    let idx = (symbol.value().arg() / TAU * m).round().rem_euclid(m) as u64 % modulation_order as u64;
    Ok(index_to_bits(binary_to_gray(idx), bits_per_symbol as usize))
}

fn psk_point(index: usize, modulation_order: usize) -> PskSymbol {
    let phase = TAU * index as f64 / modulation_order as f64;
    PskSymbol(Complex64::from_polar(1.0, phase))
}

/// A 2x2 unitary subblock carrying one symbol pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlamoutiSubblock(Matrix2<Complex64>);

impl AlamoutiSubblock {
    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }
}

/// Orthogonal space-time subblock `(1/sqrt(2)) [[s1, s2], [-s2*, s1*]]`.
pub fn build_alamouti_subblock(s1: PskSymbol, s2: PskSymbol) -> AlamoutiSubblock {
    let (s1, s2) = (s1.value(), s2.value());
    let w = std::f64::consts::FRAC_1_SQRT_2;
    AlamoutiSubblock(Matrix2::new(w * s1, w * s2, -w * s2.conj(), w * s1.conj()))
}

/// Baseline subblock without space-time coding: `diag(s1, s2)`.
pub fn build_diagonal_subblock(s1: PskSymbol, s2: PskSymbol) -> AlamoutiSubblock {
    let zero = Complex64::new(0.0, 0.0);
    AlamoutiSubblock(Matrix2::new(s1.value(), zero, zero, s2.value()))
}

/// Block-diagonal modulation matrix `blkdiag(G_1, ..., G_L)` from `T` symbols
/// consumed in pairs.
pub fn build_modulation_matrix(symbols: &[PskSymbol]) -> Result<DMatrix<Complex64>> {
    build_modulation_matrix_with(symbols, SubblockKind::Alamouti)
}

fn build_modulation_matrix_with(
    symbols: &[PskSymbol],
    kind: SubblockKind,
) -> Result<DMatrix<Complex64>> {
    if symbols.is_empty() || symbols.len() % 2 != 0 {
        return Err(Error::Config(format!(
            "modulation matrix needs an even, nonzero symbol count, got {}",
            symbols.len()
        )));
    }
    let t = symbols.len();
    let mut s = DMatrix::zeros(t, t);
    for (l, pair) in symbols.chunks_exact(2).enumerate() {
        let g = match kind {
            SubblockKind::Alamouti => build_alamouti_subblock(pair[0], pair[1]),
            SubblockKind::Diagonal => build_diagonal_subblock(pair[0], pair[1]),
        };
        s.view_mut((2 * l, 2 * l), (2, 2)).copy_from(g.matrix());
    }
    Ok(s)
}

/// Assignment of subblocks to pinching positions, together with its rank in
/// the codebook's lexicographic (Lehmer) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationPattern {
    sigma: Vec<usize>,
    rank: u64,
}

impl PermutationPattern {
    /// `sigma()[l]` is the 0-based position assigned to subblock `l`.
    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn rank(&self) -> u64 {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

/// Unranks `rank` into the permutation at that lexicographic position over
/// `0..L`, via the factorial number system. Only ranks below `2^B_index` are
/// codebook members.
pub fn index_to_permutation(rank: u64, num_subblocks: usize) -> Result<PermutationPattern> {
    let l = num_subblocks;
    if l == 0 {
        return Err(Error::Domain("permutation of zero elements".into()));
    }
    let fact = factorial(l);
    let limit = 1u64 << (63 - fact.leading_zeros());
    if rank >= limit {
        return Err(Error::Domain(format!(
            "permutation rank {rank} out of range (codebook holds {limit} of {fact} permutations)"
        )));
    }
    let mut available: Vec<usize> = (0..l).collect();
    let mut sigma = Vec::with_capacity(l);
    let mut rem = rank;
    for i in 0..l {
        let f = factorial(l - 1 - i);
        let digit = (rem / f) as usize;
        rem %= f;
        sigma.push(available.remove(digit));
    }
    Ok(PermutationPattern { sigma, rank })
}

/// Lexicographic (Lehmer) rank of a permutation; inverse of
/// [`index_to_permutation`].
pub fn permutation_to_index(pattern: &PermutationPattern) -> u64 {
    let l = pattern.sigma.len();
    let mut available: Vec<usize> = (0..l).collect();
    let mut rank = 0u64;
    for (i, &p) in pattern.sigma.iter().enumerate() {
        let digit = available.iter().position(|&x| x == p).expect("valid permutation");
        rank += digit as u64 * factorial(l - 1 - i);
        available.remove(digit);
    }
    rank
}

/// Expands a subblock-to-position assignment into the `T x T` activation
/// matrix `A = Abar (x) I_2`, with `Abar[l, sigma(l)] = 1`.
pub fn build_activation_matrix(pattern: &PermutationPattern) -> DMatrix<f64> {
    let l = pattern.len();
    let mut a = DMatrix::zeros(2 * l, 2 * l);
    for (block_row, &pos) in pattern.sigma.iter().enumerate() {
        a[(2 * block_row, 2 * pos)] = 1.0;
        a[(2 * block_row + 1, 2 * pos + 1)] = 1.0;
    }
    a
}

/// Which 2x2 subblock structure a codebook uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubblockKind {
    /// Orthogonal space-time pairs (the proposed scheme).
    Alamouti,
    /// Plain diagonal pairs (rate-matched baseline without transmit diversity).
    Diagonal,
}

/// One labeled transmit matrix `Q = S * A`.
#[derive(Debug, Clone)]
pub struct Codeword {
    matrix: DMatrix<Complex64>,
    mod_bits: Vec<bool>,
    index_bits: Vec<bool>,
}

impl Codeword {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn mod_bits(&self) -> &[bool] {
        &self.mod_bits
    }

    pub fn index_bits(&self) -> &[bool] {
        &self.index_bits
    }

    /// Concatenated label `mod_bits || index_bits` as an integer.
    pub fn label(&self) -> u64 {
        (bits_to_index(&self.mod_bits) << self.index_bits.len()) | bits_to_index(&self.index_bits)
    }
}

/// Maps a bit label onto its transmit matrix.
pub fn encode_codeword(
    mod_bits: &[bool],
    index_bits: &[bool],
    cfg: &CodebookConfig,
) -> Result<Codeword> {
    encode_with_kind(mod_bits, index_bits, cfg, SubblockKind::Alamouti)
}

fn encode_with_kind(
    mod_bits: &[bool],
    index_bits: &[bool],
    cfg: &CodebookConfig,
    kind: SubblockKind,
) -> Result<Codeword> {
    if mod_bits.len() != cfg.mod_bits() || index_bits.len() != cfg.index_bits() {
        return Err(Error::Config(format!(
            "expected {} modulation bits and {} index bits, got {} and {}",
            cfg.mod_bits(),
            cfg.index_bits(),
            mod_bits.len(),
            index_bits.len()
        )));
    }
    let bps = cfg.bits_per_symbol();
    let symbols: Vec<PskSymbol> = mod_bits
        .chunks_exact(bps)
        .map(|chunk| psk_modulate(chunk, cfg.modulation_order()))
        .collect::<Result<_>>()?;
    let s = build_modulation_matrix_with(&symbols, kind)?;
    let pattern = index_to_permutation(bits_to_index(index_bits), cfg.num_subblocks())?;
    let a = build_activation_matrix(&pattern).map(|x| Complex64::new(x, 0.0));
    Ok(Codeword {
        matrix: &s * &a,
        mod_bits: mod_bits.to_vec(),
        index_bits: index_bits.to_vec(),
    })
}

/// The full set of legitimate transmit matrices for one configuration,
/// ordered by bit label.
#[derive(Debug, Clone)]
pub struct Codebook {
    cfg: CodebookConfig,
    kind: SubblockKind,
    codewords: Vec<Codeword>,
}

impl Codebook {
    pub fn config(&self) -> &CodebookConfig {
        &self.cfg
    }

    pub fn kind(&self) -> SubblockKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword at `label`; labels index the enumeration order.
    pub fn codeword(&self, label: u64) -> &Codeword {
        &self.codewords[label as usize]
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    /// Recovers the bit label of a legitimate codebook matrix (elementwise
    /// match within `1e-9`). Exact inverse of the encoder on codebook members.
    pub fn demap(&self, matrix: &DMatrix<Complex64>) -> Result<(Vec<bool>, Vec<bool>)> {
        const TOL: f64 = 1e-9;
        for cw in &self.codewords {
            if cw.matrix.shape() == matrix.shape() {
                let dist = crate::util::max_abs(&(&cw.matrix - matrix));
                if dist < TOL {
                    return Ok((cw.mod_bits.clone(), cw.index_bits.clone()));
                }
            }
        }
        Err(Error::Detection(
            "matrix does not match any codebook member within tolerance".into(),
        ))
    }
}

fn enumerate_with_kind(cfg: &CodebookConfig, kind: SubblockKind) -> Result<Codebook> {
    let b = cfg.total_bits() as u32;
    if b > MAX_TOTAL_BITS {
        return Err(Error::Config(format!(
            "refusing exhaustive enumeration: {b} bits per block exceeds the {MAX_TOTAL_BITS}-bit guard"
        )));
    }
    let b_index = cfg.index_bits();
    let codewords = (0..cfg.codebook_size() as u64)
        .map(|label| {
            let mod_bits = index_to_bits(label >> b_index, cfg.mod_bits());
            let index_bits = index_to_bits(label & ((1 << b_index) - 1), b_index);
            encode_with_kind(&mod_bits, &index_bits, cfg, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook { cfg: *cfg, kind, codewords })
}

/// Enumerates all `2^B` codewords of the proposed scheme.
pub fn enumerate_codebook(cfg: &CodebookConfig) -> Result<Codebook> {
    enumerate_with_kind(cfg, SubblockKind::Alamouti)
}

/// Enumerates the rate-matched baseline codebook with diagonal subblocks.
pub fn build_no_alamouti_codebook(cfg: &CodebookConfig) -> Result<Codebook> {
    enumerate_with_kind(cfg, SubblockKind::Diagonal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
        let t = m.nrows();
        crate::util::max_abs(&(m.adjoint() * m - DMatrix::<Complex64>::identity(t, t)))
    }

    #[test]
    fn bpsk_is_antipodal() {
        assert_abs_diff_eq!(
            psk_modulate(&[false], 2).unwrap().value().re,
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            psk_modulate(&[true], 2).unwrap().value().re,
            -1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn qpsk_gray_anchor_and_round_trip() {
        let s = psk_modulate(&[false, false], 4).unwrap();
        assert_abs_diff_eq!(s.value().re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.value().im, 0.0, epsilon = 1e-15);
        for m in [2usize, 4, 8] {
            let bps = (m as f64).log2() as usize;
            for v in 0..m as u64 {
                let bits = index_to_bits(v, bps);
                let sym = psk_modulate(&bits, m).unwrap();
                assert!((sym.value().norm() - 1.0).abs() < 1e-12);
                assert_eq!(psk_demodulate(sym, m).unwrap(), bits);
            }
        }
    }

    #[test]
    fn psk_rejects_bad_inputs() {
        assert!(psk_modulate(&[false], 3).is_err());
        assert!(psk_modulate(&[false, true], 2).is_err());
        assert!(psk_modulate(&[], 2).is_err());
    }

    #[test]
    fn alamouti_matches_direct_substitution() {
        let one = psk_modulate(&[false], 2).unwrap();
        let neg = psk_modulate(&[true], 2).unwrap();
        let w = std::f64::consts::FRAC_1_SQRT_2;

        let g = build_alamouti_subblock(one, one);
        let expect = Matrix2::new(w, w, -w, w).map(|x| Complex64::new(x, 0.0));
        assert!(crate::util::max_abs(&(g.matrix() - expect)) < 1e-15);

        let g = build_alamouti_subblock(one, neg);
        let expect = Matrix2::new(w, -w, w, w).map(|x| Complex64::new(x, 0.0));
        assert!(crate::util::max_abs(&(g.matrix() - expect)) < 1e-15);
    }

    #[test]
    fn alamouti_unitary_and_unit_determinant_over_all_pairs() {
        for m in [2usize, 4] {
            let bps = (m as f64).log2() as usize;
            for a in 0..m as u64 {
                for b in 0..m as u64 {
                    let s1 = psk_modulate(&index_to_bits(a, bps), m).unwrap();
                    let s2 = psk_modulate(&index_to_bits(b, bps), m).unwrap();
                    let g = build_alamouti_subblock(s1, s2);
                    let gram = g.matrix().adjoint() * g.matrix();
                    assert!(crate::util::max_abs(&(gram - Matrix2::identity())) < 1e-10);
                    let det = g.matrix().determinant();
                    assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn modulation_matrix_is_block_diagonal() {
        let one = psk_modulate(&[false], 2).unwrap();
        let s = build_modulation_matrix(&[one, one]).unwrap();
        assert_eq!(s.shape(), (2, 2));

        let s = build_modulation_matrix(&[one, one, one, one]).unwrap();
        assert_eq!(s.shape(), (4, 4));
        assert!(crate::util::max_abs(&(s.view((0, 0), (2, 2)) - s.view((2, 2), (2, 2)))) < 1e-15);
        // off-diagonal blocks are zero
        assert!(crate::util::max_abs(&s.view((0, 2), (2, 2))) < 1e-15);
        assert!(crate::util::max_abs(&s.view((2, 0), (2, 2))) < 1e-15);
        assert!(unitarity_defect(&s) < 1e-10);

        assert!(build_modulation_matrix(&[one]).is_err());
        assert!(build_modulation_matrix(&[]).is_err());
    }

    /// Independent lexicographic-order oracle: enumerate all L! permutations
    /// by repeated next-permutation steps.
    fn all_permutations_lex(l: usize) -> Vec<Vec<usize>> {
        let mut p: Vec<usize> = (0..l).collect();
        let mut out = vec![p.clone()];
        loop {
            // next_permutation
            let Some(i) = (0..l.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
                break;
            };
            let j = (i + 1..l).rev().find(|&j| p[j] > p[i]).unwrap();
            p.swap(i, j);
            p[i + 1..].reverse();
            out.push(p.clone());
        }
        out
    }

    #[test]
    fn lehmer_rank_zero_is_identity() {
        let p = index_to_permutation(0, 4).unwrap();
        assert_eq!(p.sigma(), &[0, 1, 2, 3]);
    }

    #[test]
    fn lehmer_rank_thirteen_matches_lex_oracle() {
        // 1-based (3,1,4,2) is 0-based (2,0,3,1)
        let oracle = all_permutations_lex(4);
        assert_eq!(oracle.len(), 24);
        assert_eq!(oracle[13], vec![2, 0, 3, 1]);
        let p = index_to_permutation(13, 4).unwrap();
        assert_eq!(p.sigma(), &[2, 0, 3, 1]);
        assert_eq!(permutation_to_index(&p), 13);
    }

    #[test]
    fn lehmer_round_trip_exhaustive() {
        for l in 1..=5usize {
            let fact: u64 = (1..=l as u64).product();
            let limit = 1u64 << (63 - fact.leading_zeros());
            let oracle = all_permutations_lex(l);
            for rank in 0..limit {
                let p = index_to_permutation(rank, l).unwrap();
                assert_eq!(p.sigma(), oracle[rank as usize].as_slice());
                assert_eq!(permutation_to_index(&p), rank);
            }
            assert!(index_to_permutation(limit, l).is_err());
        }
    }

    #[test]
    fn activation_identity_is_identity_matrix() {
        let p = index_to_permutation(0, 2).unwrap();
        let a = build_activation_matrix(&p);
        assert!((a - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn activation_block_layout_matches_permutation_example() {
        let p = index_to_permutation(13, 4).unwrap();
        let a = build_activation_matrix(&p);
        // subblock-to-position pattern (1-based): 1->3, 2->1, 3->4, 4->2
        let bar = [[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 0.0]];
        for (l, row) in bar.iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                let block = a.view((2 * l, 2 * m), (2, 2));
                let expect = Matrix2::identity() * v;
                assert!((block - expect).amax() < 1e-15);
            }
        }
        // orthogonality holds for every pattern of L = 3
        for rank in 0..4u64 {
            let p = index_to_permutation(rank, 3).unwrap();
            let a = build_activation_matrix(&p);
            assert!((a.transpose() * &a - DMatrix::<f64>::identity(6, 6)).amax() < 1e-15);
        }
    }

    #[test]
    fn all_zero_bits_give_identity_permutation_codeword() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        let cw = encode_codeword(&vec![false; 6], &vec![false; 2], &cfg).unwrap();
        let one = psk_modulate(&[false], 2).unwrap();
        let g = build_alamouti_subblock(one, one);
        for l in 0..3 {
            assert!(crate::util::max_abs(&(cw.matrix().view((2 * l, 2 * l), (2, 2)) - g.matrix())) < 1e-15);
        }
        assert!(unitarity_defect(cw.matrix()) < 1e-12);
        assert_eq!(cw.label(), 0);
    }

    #[test]
    fn encode_rejects_wrong_bit_lengths() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        assert!(encode_codeword(&vec![false; 5], &vec![false; 2], &cfg).is_err());
        assert!(encode_codeword(&vec![false; 6], &vec![false; 3], &cfg).is_err());
    }

    #[test]
    fn default_codebook_enumeration_sizes() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        assert_eq!(cfg.total_bits(), 8);
        assert_eq!(enumerate_codebook(&cfg).unwrap().len(), 256);

        let cfg = CodebookConfig::new(2, 1).unwrap();
        assert_eq!(cfg.index_bits(), 0);
        assert_eq!(enumerate_codebook(&cfg).unwrap().len(), 4);

        let cfg = CodebookConfig::new(4, 3).unwrap();
        assert_eq!(cfg.total_bits(), 14);
        assert_eq!(cfg.codebook_size(), 16384);
    }

    #[test]
    fn enumeration_guard_refuses_oversized_codebooks() {
        let cfg = CodebookConfig::new(16, 3).unwrap(); // 26 bits
        assert!(matches!(enumerate_codebook(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn codewords_unitary_unique_and_demappable() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        let book = enumerate_codebook(&cfg).unwrap();
        for (i, cw) in book.codewords().iter().enumerate() {
            assert!(unitarity_defect(cw.matrix()) < 1e-10);
            assert_eq!(cw.label(), i as u64);
            let (mod_bits, index_bits) = book.demap(cw.matrix()).unwrap();
            assert_eq!(mod_bits, cw.mod_bits());
            assert_eq!(index_bits, cw.index_bits());
        }
        // pairwise distinct matrices
        for i in 0..book.len() {
            for j in (i + 1)..book.len() {
                let d = crate::util::max_abs(&(book.codeword(i as u64).matrix() - book.codeword(j as u64).matrix()));
                assert!(d > 1e-6, "codewords {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn demap_rejects_off_manifold_matrix() {
        let cfg = CodebookConfig::new(2, 1).unwrap();
        let book = enumerate_codebook(&cfg).unwrap();
        let mut m = book.codeword(0).matrix().clone();
        m[(0, 0)] += Complex64::new(1e-3, 0.0);
        assert!(matches!(book.demap(&m), Err(Error::Detection(_))));
    }

    #[test]
    fn no_alamouti_baseline_shares_rate_and_unitarity() {
        let cfg = CodebookConfig::new(2, 3).unwrap();
        let base = build_no_alamouti_codebook(&cfg).unwrap();
        assert_eq!(base.len(), enumerate_codebook(&cfg).unwrap().len());
        for cw in base.codewords() {
            assert!(unitarity_defect(cw.matrix()) < 1e-10);
        }
        // all-zero bits, single position: diag(+1, +1) = identity
        let cfg1 = CodebookConfig::new(2, 1).unwrap();
        let base1 = build_no_alamouti_codebook(&cfg1).unwrap();
        let id = DMatrix::<Complex64>::identity(2, 2);
        assert!(crate::util::max_abs(&(base1.codeword(0).matrix() - id)) < 1e-15);
    }
}
