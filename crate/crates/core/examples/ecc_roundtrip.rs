// Protect a 64-bit word and a full block with the SECDED code, then damage
// them and watch the decoder repair or flag the damage.

use hardpage::ecc::{self, DecodeOutcome, BLOCK_SIZE};

pub fn run_example() -> hardpage::Result<()> {
    let word = 0x0123_4567_89AB_CDEF_u64;
    let cw = ecc::encode(word);
    println!("data {word:#018x} check {:#04x}", cw.check);

    let (fixed, outcome) = ecc::decode(cw.with_bit_flipped(17));
    assert_eq!((fixed, outcome), (word, DecodeOutcome::Corrected(17)));
    println!("one flip at bit 17: {outcome:?}");

    let (_, outcome) = ecc::decode(cw.with_bit_flipped(3).with_bit_flipped(70));
    assert_eq!(outcome, DecodeOutcome::Uncorrectable);
    println!("two flips: {outcome:?}");

    let plain: Vec<u8> = (0..BLOCK_SIZE).map(|i| (i * 7) as u8).collect();
    let mut stored = ecc::encode_block(&plain)?;
    stored[100] ^= 0x01; // one bit in word 12
    stored[800] ^= 0x81; // two bits in word 100
    let (decoded, report) = ecc::decode_block(&stored)?;
    println!(
        "block: {} corrected, uncorrectable words {:?}",
        report.corrected_count, report.uncorrectable_word_indices
    );
    assert_eq!(report.uncorrectable_word_indices, vec![100]);
    assert_eq!(decoded[96..104], plain[96..104]);
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
