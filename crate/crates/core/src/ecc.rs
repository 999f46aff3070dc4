//! Extended Hamming (72,64) SECDED codec.
//!
//! A codeword is a 64-bit data word plus one check byte. The Hamming part
//! uses the classical positional layout over codeword positions 1..=71:
//! parity bits sit at the power-of-two positions and the data bits fill the
//! remaining positions in ascending order, starting from the least
//! significant bit of the word. Check byte bit `k` (k < 7) holds the parity
//! bit at position `2^k`; bit 7 holds the overall parity of all 72 bits.
//!
//! Decoder outcomes report a *physical* bit index in `0..72`:
//!
//! ```text
//!   0..=63   data word bit
//!   64..=70  check byte bit 0..=6 (Hamming parity)
//!   71       check byte bit 7 (overall parity)
//! ```
//!
//! Blocks are 4096 plain bytes (512 little-endian words) encoded to 4608
//! bytes: the data words verbatim followed by a trailing region of 512 check
//! bytes, check byte `i` at offset `4096 + i`.

use crate::error::{Error, Result};

/// Plain bytes per block.
pub const BLOCK_SIZE: usize = 4096;
/// Data words per block.
pub const WORDS_PER_BLOCK: usize = BLOCK_SIZE / 8;
/// Encoded bytes per block.
pub const ENCODED_BLOCK_SIZE: usize = BLOCK_SIZE + WORDS_PER_BLOCK;
/// Physical bits per codeword.
pub const CODEWORD_BITS: usize = 72;

const OVERALL_PARITY_BIT: u8 = 71;
const NO_BIT: u8 = u8::MAX;

/// Hamming position of each data bit.
const DATA_POSITIONS: [u8; 64] = {
    let mut out = [0u8; 64];
    let mut pos = 1u8;
    let mut j = 0;
    while j < 64 {
        if pos & (pos - 1) != 0 {
            out[j] = pos;
            j += 1;
        }
        pos += 1;
    }
    out
};

/// Data bits covered by each of the seven Hamming parity equations.
const PARITY_MASKS: [u64; 7] = {
    let mut masks = [0u64; 7];
    let mut j = 0;
    while j < 64 {
        let mut k = 0;
        while k < 7 {
            if DATA_POSITIONS[j] >> k & 1 == 1 {
                masks[k] |= 1 << j;
            }
            k += 1;
        }
        j += 1;
    }
    masks
};

/// Syndrome value to physical bit index, `NO_BIT` for positions past 71.
const SYNDROME_TO_BIT: [u8; 128] = {
    let mut table = [NO_BIT; 128];
    let mut k = 0;
    while k < 7 {
        table[1 << k] = 64 + k as u8;
        k += 1;
    }
    let mut j = 0;
    while j < 64 {
        table[DATA_POSITIONS[j] as usize] = j as u8;
        j += 1;
    }
    table
};

/// A 64-bit data word with its SECDED check byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CodeWord {
    pub data: u64,
    pub check: u8,
}

impl CodeWord {
    /// Returns the codeword with physical bit `bit` (0..72) inverted.
    pub fn with_bit_flipped(self, bit: usize) -> CodeWord {
        assert!(bit < CODEWORD_BITS, "codeword bit {bit} out of range");
        let mut out = self;
        if bit < 64 {
            out.data ^= 1 << bit;
        } else {
            out.check ^= 1 << (bit - 64);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    Clean,
    /// A single error at the given physical bit index was corrected.
    Corrected(u8),
    /// Two (or an even number of) bit errors were detected. The returned data
    /// must not be trusted.
    Uncorrectable,
}

#[inline]
fn parity(x: u64) -> u8 {
    (x.count_ones() & 1) as u8
}

#[inline]
fn hamming_bits(data: u64) -> u8 {
    let mut check = 0u8;
    for (k, mask) in PARITY_MASKS.iter().enumerate() {
        check |= parity(data & mask) << k;
    }
    check
}

pub fn encode(data: u64) -> CodeWord {
    let hamming = hamming_bits(data);
    let overall = parity(data) ^ parity(u64::from(hamming));
    CodeWord {
        data,
        check: hamming | overall << 7,
    }
}

pub fn decode(cw: CodeWord) -> (u64, DecodeOutcome) {
    let syndrome = (hamming_bits(cw.data) ^ cw.check) & 0x7F;
    let overall = parity(cw.data) ^ parity(u64::from(cw.check));
    match (syndrome, overall) {
        (0, 0) => (cw.data, DecodeOutcome::Clean),
        (0, _) => (cw.data, DecodeOutcome::Corrected(OVERALL_PARITY_BIT)),
        (_, 1) => match SYNDROME_TO_BIT[syndrome as usize] {
            NO_BIT => (cw.data, DecodeOutcome::Uncorrectable),
            bit if bit < 64 => (cw.data ^ 1 << bit, DecodeOutcome::Corrected(bit)),
            bit => (cw.data, DecodeOutcome::Corrected(bit)),
        },
        _ => (cw.data, DecodeOutcome::Uncorrectable),
    }
}

/// Per-block decode summary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockReport {
    pub corrected_count: usize,
    pub uncorrectable_word_indices: Vec<usize>,
}

impl BlockReport {
    pub fn is_clean(&self) -> bool {
        self.corrected_count == 0 && self.uncorrectable_word_indices.is_empty()
    }

    pub fn uncorrectable_count(&self) -> usize {
        self.uncorrectable_word_indices.len()
    }
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::InvalidBlockSize { expected, actual });
    }
    Ok(())
}

#[inline]
fn word_at(bytes: &[u8], i: usize) -> u64 {
    u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap())
}

pub fn encode_block(plain: &[u8]) -> Result<Vec<u8>> {
    let mut out = vec![0u8; ENCODED_BLOCK_SIZE];
    encode_block_into(plain, &mut out)?;
    Ok(out)
}

pub fn encode_block_into(plain: &[u8], out: &mut [u8]) -> Result<()> {
    check_len(plain.len(), BLOCK_SIZE)?;
    check_len(out.len(), ENCODED_BLOCK_SIZE)?;
    let (data, checks) = out.split_at_mut(BLOCK_SIZE);
    data.copy_from_slice(plain);
    for (i, check) in checks.iter_mut().enumerate() {
        *check = encode(word_at(plain, i)).check;
    }
    Ok(())
}

pub fn decode_block(encoded: &[u8]) -> Result<(Vec<u8>, BlockReport)> {
    let mut out = vec![0u8; BLOCK_SIZE];
    let report = decode_block_into(encoded, &mut out)?;
    Ok((out, report))
}

/// Decodes into `out`. Words reported as uncorrectable are copied as read.
pub fn decode_block_into(encoded: &[u8], out: &mut [u8]) -> Result<BlockReport> {
    check_len(encoded.len(), ENCODED_BLOCK_SIZE)?;
    check_len(out.len(), BLOCK_SIZE)?;
    let mut report = BlockReport::default();
    for i in 0..WORDS_PER_BLOCK {
        let cw = CodeWord {
            data: word_at(encoded, i),
            check: encoded[BLOCK_SIZE + i],
        };
        let (data, outcome) = decode(cw);
        match outcome {
            DecodeOutcome::Clean => {}
            DecodeOutcome::Corrected(_) => report.corrected_count += 1,
            DecodeOutcome::Uncorrectable => report.uncorrectable_word_indices.push(i),
        }
        out[8 * i..8 * i + 8].copy_from_slice(&data.to_le_bytes());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Evaluates every parity equation bit by bit over an explicit positional
    /// codeword. Shares nothing with the table-driven encoder.
    fn oracle_check(word: u64) -> u8 {
        let mut positions = [0u8; 72];
        let mut j = 0;
        for (pos, slot) in positions.iter_mut().enumerate().skip(1) {
            if pos.is_power_of_two() {
                continue;
            }
            if j < 64 {
                *slot = (word >> j & 1) as u8;
                j += 1;
            }
        }
        let mut check = 0u8;
        for k in 0..7 {
            let mut p = 0u8;
            for (pos, bit) in positions.iter().enumerate() {
                if pos >> k & 1 == 1 {
                    p ^= bit;
                }
            }
            check |= p << k;
        }
        let ones = word.count_ones() + check.count_ones();
        check | ((ones & 1) as u8) << 7
    }

    #[test]
    fn zero_word_has_zero_check() {
        assert_eq!(encode(0).check, 0);
    }

    #[test]
    fn frozen_check_bytes() {
        // Frozen from the positional oracle.
        let cases = [
            (0x0000_0000_0000_0001u64, 0x83u8),
            (0x0000_0000_0000_0002, 0x85),
            (0x8000_0000_0000_0000, 0xC7),
            (0xFFFF_FFFF_FFFF_FFFF, 0xFF),
            (0x0123_4567_89AB_CDEF, 0x9C),
            (0xDEAD_BEEF_CAFE_BABE, 0x3A),
        ];
        for (word, check) in cases {
            assert_eq!(oracle_check(word), check, "oracle {word:#x}");
            assert_eq!(encode(word).check, check, "codec {word:#x}");
        }
    }

    #[test]
    fn every_single_bit_word_matches_oracle() {
        for j in 0..64 {
            assert_eq!(encode(1 << j).check, oracle_check(1 << j));
        }
    }

    #[test]
    fn single_flips_are_corrected_at_their_position() {
        for word in [0u64, u64::MAX, 0x0123_4567_89AB_CDEF] {
            let cw = encode(word);
            for bit in 0..CODEWORD_BITS {
                let (data, outcome) = decode(cw.with_bit_flipped(bit));
                assert_eq!(data, word);
                assert_eq!(outcome, DecodeOutcome::Corrected(bit as u8));
            }
        }
    }

    #[test]
    fn double_flips_are_detected() {
        let cw = encode(0xA5A5_0F0F_1234_8765);
        let mut pairs = 0;
        for a in 0..CODEWORD_BITS {
            for b in a + 1..CODEWORD_BITS {
                let (_, outcome) = decode(cw.with_bit_flipped(a).with_bit_flipped(b));
                assert_eq!(outcome, DecodeOutcome::Uncorrectable, "bits {a},{b}");
                pairs += 1;
            }
        }
        assert_eq!(pairs, 2556);
    }

    #[test]
    fn block_length_is_checked() {
        assert!(matches!(
            encode_block(&[0u8; 4095]),
            Err(Error::InvalidBlockSize {
                expected: 4096,
                actual: 4095
            })
        ));
        assert!(matches!(
            decode_block(&[0u8; 4096]),
            Err(Error::InvalidBlockSize { .. })
        ));
    }

    #[test]
    fn zero_block_encodes_to_zeros() {
        assert_eq!(
            encode_block(&[0u8; BLOCK_SIZE]).unwrap(),
            vec![0u8; ENCODED_BLOCK_SIZE]
        );
    }

    #[test]
    fn block_layout_is_words_then_checks() {
        let mut plain = vec![0u8; BLOCK_SIZE];
        plain[8 * 3..8 * 4].copy_from_slice(&1u64.to_le_bytes());
        plain[8 * 511..].copy_from_slice(&0xDEAD_BEEF_CAFE_BABEu64.to_le_bytes());
        let enc = encode_block(&plain).unwrap();
        assert_eq!(&enc[..BLOCK_SIZE], &plain[..]);
        let mut expected_checks = vec![0u8; WORDS_PER_BLOCK];
        expected_checks[3] = 0x83;
        expected_checks[511] = 0x3A;
        assert_eq!(&enc[BLOCK_SIZE..], &expected_checks[..]);
    }

    #[test]
    fn block_flip_in_data_and_check_regions() {
        let plain: Vec<u8> = (0..BLOCK_SIZE).map(|i| (i * 7 % 251) as u8).collect();
        let enc = encode_block(&plain).unwrap();
        for byte in [0usize, 100, 4095, 4096, 4300, 4607] {
            let mut bad = enc.clone();
            bad[byte] ^= 0x10;
            let (out, report) = decode_block(&bad).unwrap();
            assert_eq!(out, plain);
            assert_eq!(report.corrected_count, 1);
            assert!(report.uncorrectable_word_indices.is_empty());
        }
    }

    #[test]
    fn block_double_flip_reports_word_index() {
        let plain = vec![0x3Cu8; BLOCK_SIZE];
        let mut enc = encode_block(&plain).unwrap();
        enc[8 * 17] ^= 0x01;
        enc[BLOCK_SIZE + 17] ^= 0x04;
        let (out, report) = decode_block(&enc).unwrap();
        assert_eq!(report.uncorrectable_word_indices, vec![17]);
        assert_eq!(report.corrected_count, 0);
        // passed through as read
        assert_eq!(out[8 * 17], 0x3D);
    }

    proptest! {
        #[test]
        fn round_trip_is_clean(word in any::<u64>()) {
            prop_assert_eq!(decode(encode(word)), (word, DecodeOutcome::Clean));
        }

        #[test]
        fn encoder_matches_oracle(word in any::<u64>()) {
            prop_assert_eq!(encode(word).check, oracle_check(word));
        }

        #[test]
        fn check_bits_are_linear(a in any::<u64>(), b in any::<u64>()) {
            prop_assert_eq!(encode(a ^ b).check, encode(a).check ^ encode(b).check);
        }

        #[test]
        fn block_round_trip(plain in proptest::collection::vec(any::<u8>(), BLOCK_SIZE)) {
            let (out, report) = decode_block(&encode_block(&plain).unwrap()).unwrap();
            prop_assert_eq!(out, plain);
            prop_assert!(report.is_clean());
        }
    }
}
