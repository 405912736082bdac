//! Class H3 universal hashing.
//!
//! A member of the family is an `i x j` Boolean matrix `Q`; hashing a key is
//! the GF(2) vector-matrix product: the bucket index is the XOR of the rows
//! selected by the set bits of the key. The map is linear, so
//! `h(x ^ y) == h(x) ^ h(y)`, which the workload generator exploits to build
//! bucket preimages.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::SplitMix64;

/// One H3 family member: `key_bits` rows, each an `index_bits`-wide value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct H3Matrix {
    key_bits: u32,
    index_bits: u32,
    rows: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum H3Error {
    ZeroKeyBits,
    ZeroIndexBits,
    KeyBitsTooLarge(u32),
    IndexBitsTooLarge(u32),
    BadHexRow { line: usize },
    RowOutOfRange { line: usize },
}

impl fmt::Display for H3Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            H3Error::ZeroKeyBits => write!(f, "key width must be at least 1 bit"),
            H3Error::ZeroIndexBits => write!(f, "index width must be at least 1 bit"),
            H3Error::KeyBitsTooLarge(b) => write!(f, "key width {b} exceeds 128 bits"),
            H3Error::IndexBitsTooLarge(b) => write!(f, "index width {b} exceeds 64 bits"),
            H3Error::BadHexRow { line } => write!(f, "line {line}: not a hex row value"),
            H3Error::RowOutOfRange { line } => {
                write!(f, "line {line}: row value does not fit the index width")
            }
        }
    }
}

impl core::error::Error for H3Error {}

impl H3Matrix {
    /// Draws a matrix from the seeded generator. Same seed, same matrix.
    pub fn new(key_bits: u32, index_bits: u32, seed: u64) -> Result<Self, H3Error> {
        if key_bits == 0 {
            return Err(H3Error::ZeroKeyBits);
        }
        if index_bits == 0 {
            return Err(H3Error::ZeroIndexBits);
        }
        if key_bits > 128 {
            return Err(H3Error::KeyBitsTooLarge(key_bits));
        }
        if index_bits > 64 {
            return Err(H3Error::IndexBitsTooLarge(index_bits));
        }
        let mut rng = SplitMix64::new(seed);
        let mask = Self::index_mask(index_bits);
        let rows = (0..key_bits).map(|_| rng.next_u64() & mask).collect();
        Ok(Self { key_bits, index_bits, rows })
    }

    /// Builds a matrix from explicit rows. Used by tests and config loading.
    pub fn from_rows(index_bits: u32, rows: Vec<u64>) -> Result<Self, H3Error> {
        if rows.is_empty() {
            return Err(H3Error::ZeroKeyBits);
        }
        if index_bits == 0 {
            return Err(H3Error::ZeroIndexBits);
        }
        if rows.len() > 128 {
            return Err(H3Error::KeyBitsTooLarge(rows.len() as u32));
        }
        if index_bits > 64 {
            return Err(H3Error::IndexBitsTooLarge(index_bits));
        }
        let mask = Self::index_mask(index_bits);
        for (i, &r) in rows.iter().enumerate() {
            if r & !mask != 0 {
                return Err(H3Error::RowOutOfRange { line: i + 1 });
            }
        }
        Ok(Self { key_bits: rows.len() as u32, index_bits, rows })
    }

    fn index_mask(index_bits: u32) -> u64 {
        if index_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << index_bits) - 1
        }
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn index_bits(&self) -> u32 {
        self.index_bits
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// Bucket index for `key`. Bit `m` of the key (least significant first)
    /// selects row `m`; the index is the XOR of the selected rows.
    pub fn hash(&self, key: u128) -> u64 {
        let mut acc = 0u64;
        for m in 0..self.key_bits {
            if (key >> m) & 1 == 1 {
                acc ^= self.rows[m as usize];
            }
        }
        acc
    }

    /// Serializes the rows as one lowercase hex value per line, fixed width,
    /// for reproducible experiment configs.
    pub fn to_hex_block(&self) -> String {
        use core::fmt::Write;
        let digits = ((self.index_bits + 3) / 4) as usize;
        let mut out = String::new();
        for &row in &self.rows {
            let _ = writeln!(out, "{row:0digits$x}");
        }
        out
    }

    /// Parses the `to_hex_block` format. The key width is the line count.
    pub fn from_hex_block(block: &str, index_bits: u32) -> Result<Self, H3Error> {
        let mut rows = Vec::new();
        for (i, line) in block.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row =
                u64::from_str_radix(line, 16).map_err(|_| H3Error::BadHexRow { line: i + 1 })?;
            rows.push(row);
        }
        let m = Self::from_rows(index_bits, rows);
        // Re-map range errors to carry hex-block line numbers.
        match m {
            Err(H3Error::RowOutOfRange { line }) => Err(H3Error::RowOutOfRange { line }),
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: per-output-bit GF(2) dot product of the key with
    /// the matrix column, summed mod 2.
    fn gf2_matvec(rows: &[u64], index_bits: u32, key: u128) -> u64 {
        let mut out = 0u64;
        for bit in 0..index_bits {
            let mut acc = 0u64;
            for (m, &row) in rows.iter().enumerate() {
                acc += ((key >> m) & 1) as u64 * ((row >> bit) & 1);
            }
            out |= (acc % 2) << bit;
        }
        out
    }

    #[test]
    fn shape_forced_by_definition() {
        let m = H3Matrix::new(4, 3, 1).unwrap();
        assert_eq!(m.rows().len(), 4);
        assert!(m.rows().iter().all(|&r| r < 8));

        let m = H3Matrix::new(32, 16, 7).unwrap();
        assert_eq!(m.rows().len(), 32);
        assert!(m.rows().iter().all(|&r| r < 65536));
    }

    #[test]
    fn same_seed_same_matrix() {
        assert_eq!(H3Matrix::new(4, 3, 1).unwrap(), H3Matrix::new(4, 3, 1).unwrap());
    }

    #[test]
    fn rejects_zero_widths() {
        assert_eq!(H3Matrix::new(0, 3, 1), Err(H3Error::ZeroKeyBits));
        assert_eq!(H3Matrix::new(4, 0, 1), Err(H3Error::ZeroIndexBits));
    }

    #[test]
    fn zero_key_hashes_to_zero() {
        let m = H3Matrix::new(17, 9, 99).unwrap();
        assert_eq!(m.hash(0), 0);
    }

    #[test]
    fn worked_example_against_gf2_oracle() {
        // rows 001, 010, 100, 111; key 0b1011 selects rows 0, 1, 3.
        let m = H3Matrix::from_rows(3, alloc::vec![0b001, 0b010, 0b100, 0b111]).unwrap();
        assert_eq!(m.hash(0b1011), 0b100);
        assert_eq!(gf2_matvec(m.rows(), 3, 0b1011), 0b100);
    }

    #[test]
    fn matches_gf2_oracle_on_random_inputs() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let key_bits = 1 + (rng.below(40) as u32);
            let index_bits = 1 + (rng.below(16) as u32);
            let m = H3Matrix::new(key_bits, index_bits, rng.next_u64()).unwrap();
            let key = rng.key_bits(key_bits);
            assert_eq!(m.hash(key), gf2_matvec(m.rows(), index_bits, key));
        }
    }

    #[test]
    fn linearity() {
        let m = H3Matrix::new(24, 10, 5).unwrap();
        let mut rng = SplitMix64::new(11);
        for _ in 0..1000 {
            let x = rng.key_bits(24);
            let y = rng.key_bits(24);
            assert_eq!(m.hash(x ^ y), m.hash(x) ^ m.hash(y));
        }
    }

    #[test]
    fn hex_block_round_trip() {
        let m = H3Matrix::new(12, 10, 77).unwrap();
        let block = m.to_hex_block();
        let back = H3Matrix::from_hex_block(&block, 10).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn hex_block_rejects_garbage() {
        assert!(matches!(
            H3Matrix::from_hex_block("3f\nzz\n", 8),
            Err(H3Error::BadHexRow { line: 2 })
        ));
    }
}
