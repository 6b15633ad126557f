//! Property tests for the fixed-point codec and the bit-matrix file format.

use proptest::prelude::*;

use hlsforge::codec::{
    decode_value, encode_value, read_bitmatrices, write_bitmatrices, BitMatrix, FixedPointFormat,
};

fn fmt() -> FixedPointFormat {
    FixedPointFormat::default()
}

proptest! {
    /// Grid values (multiples of 2^-12) round-trip exactly.
    #[test]
    fn grid_values_roundtrip_exactly(raw in 0u64..(1u64 << 32)) {
        let v = raw as f64 / 4096.0;
        let row = encode_value(v, &fmt()).unwrap();
        prop_assert_eq!(decode_value(&row, &fmt()), v);
    }

    /// Arbitrary in-range values decode within half a resolution step.
    #[test]
    fn arbitrary_values_roundtrip_within_half_ulp(unit in 0.0f64..1.0) {
        let v = unit * fmt().max_value();
        let row = encode_value(v, &fmt()).unwrap();
        let back = decode_value(&row, &fmt());
        prop_assert!((back - v).abs() <= 1.0 / 8192.0, "{} -> {}", v, back);
    }

    /// Encoding is monotone in the raw integer ordering.
    #[test]
    fn encoding_is_monotone(a in 0.0f64..1048575.9, b in 0.0f64..1048575.9) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let lo_row = encode_value(lo, &fmt()).unwrap();
        let hi_row = encode_value(hi, &fmt()).unwrap();
        let to_raw = |row: &[u8]| row.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        prop_assert!(to_raw(&lo_row) <= to_raw(&hi_row));
    }

    /// The record file format round-trips sets of matrices bit-exactly.
    #[test]
    fn bitmatrix_file_roundtrips(
        matrices in proptest::collection::vec(
            (1usize..5, proptest::collection::vec(any::<bool>(), 160)),
            1..4,
        )
    ) {
        let set: Vec<BitMatrix> = matrices
            .into_iter()
            .map(|(rows, raw)| {
                let cols = 32;
                let bits: Vec<u8> = raw[..rows * cols].iter().map(|&b| b as u8).collect();
                let labels = (0..rows).map(|r| format!("row{r}")).collect();
                BitMatrix::from_bits(rows, cols, bits, labels)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.hlsb");
        write_bitmatrices(&path, &set).unwrap();
        let back = read_bitmatrices(&path).unwrap();
        prop_assert_eq!(set, back);
    }
}
