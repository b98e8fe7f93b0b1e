//! Bit-vector helpers shared by the mapper, detector, and harness.
//!
//! Bit arrays are MSB-first: `bits_to_index(&[true, false]) == 2`.

/// Interprets an MSB-first bit slice as an unsigned integer.
pub fn bits_to_index(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

/// Expands `value` into `width` MSB-first bits.
pub fn index_to_bits(value: u64, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}

/// Binary-reflected Gray code of `value`.
pub fn binary_to_gray(value: u64) -> u64 {
    value ^ (value >> 1)
}

/// Inverse of [`binary_to_gray`].
pub fn gray_to_binary(gray: u64) -> u64 {
    let mut value = gray;
    let mut shift = 1;
    while (gray >> shift) != 0 {
        value ^= gray >> shift;
        shift += 1;
    }
    value
}

/// Hamming distance between two labels of equal width.
pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// log2 of a power of two, or `None` if `value` is not a positive power of two.
pub fn exact_log2(value: u64) -> Option<u32> {
    if value.is_power_of_two() {
        Some(value.trailing_zeros())
    } else {
        None
    }
}
