//! SRAM capacity planning: table memory, block counts per device, and
//! maximum table sizes under a block budget.
//!
//! A table of `E` entries and `S` slots stores one `key + value + 1`-bit
//! word per slot, replicated across `p` PEs and split over `k` banks each,
//! so raw storage is `p * k * E * S * word` bits. On a device, each bank
//! occupies `ceil(E*S / depth) * ceil(word / width)` blocks: wide words
//! cascade whole block columns, there is no bit-packing across slots.

use alloc::string::String;
use alloc::vec::Vec;

/// On-chip SRAM block geometry of one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceProfile {
    pub name: String,
    pub total_blocks: u64,
    /// Words per block.
    pub block_depth: u64,
    /// Bits per word.
    pub block_width: u64,
}

impl DeviceProfile {
    pub fn total_bits(&self) -> u64 {
        self.total_blocks * self.block_depth * self.block_width
    }

    /// Alveo U250: 1280 URAM blocks of 4096 x 72 (360 Mb).
    pub fn u250() -> Self {
        DeviceProfile {
            name: String::from("u250"),
            total_blocks: 1280,
            block_depth: 4096,
            block_width: 72,
        }
    }

    /// Stratix 10 (GX2800-class): 11721 M20K blocks of 512 x 40 (229 Mb).
    pub fn stratix10() -> Self {
        DeviceProfile {
            name: String::from("stratix10"),
            total_blocks: 11721,
            block_depth: 512,
            block_width: 40,
        }
    }
}

/// Table configuration as the planner sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableGeometry {
    pub pe_count: u64,
    pub mutation_pes: u64,
    pub entries: u64,
    pub slots: u64,
    pub key_bits: u64,
    pub value_bits: u64,
}

impl TableGeometry {
    /// Stored word: key, value, and the occupancy parity bit.
    pub fn slot_word_bits(&self) -> u64 {
        self.key_bits + self.value_bits + 1
    }
}

/// Raw storage in bits: `p * k * E * S * slot_word`.
pub fn table_memory_bits(geom: &TableGeometry) -> u64 {
    geom.pe_count * geom.mutation_pes * geom.entries * geom.slots * geom.slot_word_bits()
}

pub fn table_memory_bytes(geom: &TableGeometry) -> f64 {
    table_memory_bits(geom) as f64 / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockUsage {
    pub per_bank_blocks: u64,
    pub total_blocks: u64,
    /// Fraction of the device's blocks, may exceed 1.
    pub utilization: f64,
    /// False when the table does not fit the device.
    pub fits: bool,
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Blocks and utilization for one table on one device. An oversized table is
/// reported as not fitting, never as an error.
pub fn blocks_for_table(geom: &TableGeometry, device: &DeviceProfile) -> BlockUsage {
    let per_bank = div_ceil(geom.entries * geom.slots, device.block_depth)
        * div_ceil(geom.slot_word_bits(), device.block_width);
    let total = geom.pe_count * geom.mutation_pes * per_bank;
    BlockUsage {
        per_bank_blocks: per_bank,
        total_blocks: total,
        utilization: total as f64 / device.total_blocks as f64,
        fits: total <= device.total_blocks,
    }
}

/// Largest power-of-two entry count whose block usage stays within
/// `budget_fraction` of the device, or 0 when even a single entry does not.
pub fn max_entries(
    device: &DeviceProfile,
    pe_count: u64,
    mutation_pes: u64,
    slots: u64,
    key_bits: u64,
    value_bits: u64,
    budget_fraction: f64,
) -> u64 {
    // Truncation is floor for non-negative budgets.
    let budget = (device.total_blocks as f64 * budget_fraction) as u64;
    let fits = |entries: u64| {
        let geom = TableGeometry { pe_count, mutation_pes, entries, slots, key_bits, value_bits };
        blocks_for_table(&geom, device).total_blocks <= budget
    };
    if !fits(1) {
        return 0;
    }
    let mut entries = 1u64;
    while entries < (1 << 40) && fits(entries * 2) {
        entries *= 2;
    }
    entries
}

/// One grid point of a capacity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub pe_count: u64,
    pub mutation_pes: u64,
    pub entries: u64,
    pub slots: u64,
    pub key_bits: u64,
    pub value_bits: u64,
    pub bytes: f64,
    pub blocks: u64,
    pub utilization: f64,
    pub fits: bool,
    pub max_entries_in_budget: u64,
}

/// Evaluates every grid point against a device.
pub fn plan_sweep(
    device: &DeviceProfile,
    pe_counts: &[u64],
    mutation_pes: &[u64],
    entries: &[u64],
    slots: &[u64],
    widths: &[(u64, u64)],
    budget_fraction: f64,
) -> Vec<PlanRow> {
    let mut rows = Vec::new();
    for &p in pe_counts {
        for &k in mutation_pes {
            if k > p {
                continue;
            }
            for &e in entries {
                for &s in slots {
                    for &(kb, vb) in widths {
                        let geom = TableGeometry {
                            pe_count: p,
                            mutation_pes: k,
                            entries: e,
                            slots: s,
                            key_bits: kb,
                            value_bits: vb,
                        };
                        let usage = blocks_for_table(&geom, device);
                        rows.push(PlanRow {
                            pe_count: p,
                            mutation_pes: k,
                            entries: e,
                            slots: s,
                            key_bits: kb,
                            value_bits: vb,
                            bytes: table_memory_bytes(&geom),
                            blocks: usage.total_blocks,
                            utilization: usage.utilization,
                            fits: usage.fits,
                            max_entries_in_budget: max_entries(
                                device,
                                p,
                                k,
                                s,
                                kb,
                                vb,
                                budget_fraction,
                            ),
                        });
                    }
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(p: u64, k: u64, e: u64, s: u64, kb: u64, vb: u64) -> TableGeometry {
        TableGeometry {
            pe_count: p,
            mutation_pes: k,
            entries: e,
            slots: s,
            key_bits: kb,
            value_bits: vb,
        }
    }

    #[test]
    fn memory_formula_endpoints() {
        // 50K entries, 2 slots, 4B keys and values: 1.625 MB at (2,1),
        // 208 MB at (16,16).
        let small = geom(2, 1, 50_000, 2, 32, 32);
        assert_eq!(table_memory_bytes(&small), 1_625_000.0);
        assert!(table_memory_bytes(&small) < 2e6);

        let large = geom(16, 16, 50_000, 2, 32, 32);
        assert_eq!(table_memory_bytes(&large), 208_000_000.0);
        assert!(table_memory_bytes(&large) > 100e6);
    }

    #[test]
    fn memory_formula_unit_case() {
        assert_eq!(table_memory_bits(&geom(1, 1, 1, 1, 32, 32)), 65);
        assert_eq!(table_memory_bytes(&geom(1, 1, 1, 1, 32, 32)), 8.125);
    }

    #[test]
    fn memory_monotone_in_every_factor() {
        let base = geom(4, 2, 1 << 15, 2, 32, 32);
        let bytes = table_memory_bytes(&base);
        for bigger in [
            geom(8, 2, 1 << 15, 2, 32, 32),
            geom(4, 4, 1 << 15, 2, 32, 32),
            geom(4, 2, 1 << 16, 2, 32, 32),
            geom(4, 2, 1 << 15, 4, 32, 32),
            geom(4, 2, 1 << 15, 2, 64, 64),
        ] {
            assert!(table_memory_bytes(&bigger) > bytes);
        }
    }

    #[test]
    fn u250_utilization_rows() {
        // 64+1 = 65-bit words fit one 72-bit URAM column.
        let device = DeviceProfile::u250();
        let rows = [
            geom(4, 2, 128 << 10, 4, 32, 32),
            geom(8, 2, 64 << 10, 4, 32, 32),
            geom(16, 2, 32 << 10, 4, 32, 32),
            geom(8, 8, 16 << 10, 4, 32, 32),
        ];
        for g in rows {
            let usage = blocks_for_table(&g, &device);
            assert_eq!(usage.total_blocks, 1024, "{g:?}");
            assert_eq!(usage.utilization, 0.80, "{g:?}");
            assert!(usage.fits);
        }
        // Spot-check the block arithmetic of the first row.
        let usage = blocks_for_table(&rows[0], &device);
        assert_eq!(usage.per_bank_blocks, 128);
    }

    #[test]
    fn single_block_degenerate_table() {
        let device = DeviceProfile::u250();
        let usage = blocks_for_table(&geom(1, 1, 1, 1, 32, 32), &device);
        assert_eq!(usage.total_blocks, 1);
    }

    #[test]
    fn oversized_table_reported_not_fitting() {
        let device = DeviceProfile::u250();
        let usage = blocks_for_table(&geom(16, 16, 1 << 20, 4, 64, 64), &device);
        assert!(!usage.fits);
        assert!(usage.utilization > 1.0);
    }

    #[test]
    fn blocks_never_undershoot_raw_bits() {
        // Quantization only rounds up.
        let device = DeviceProfile::u250();
        let mut rng = crate::rng::SplitMix64::new(2);
        for _ in 0..500 {
            let g = geom(
                1 + rng.below(16),
                1,
                1 + rng.below(1 << 18),
                1 + rng.below(8),
                1 + rng.below(128),
                1 + rng.below(128),
            );
            let g = TableGeometry { mutation_pes: 1 + rng.below(g.pe_count), ..g };
            let usage = blocks_for_table(&g, &device);
            let block_bits = usage.total_blocks * device.block_depth * device.block_width;
            assert!(block_bits >= table_memory_bits(&g));
        }
    }

    #[test]
    fn max_entries_inverts_utilization_row() {
        let device = DeviceProfile::u250();
        assert_eq!(max_entries(&device, 4, 2, 4, 32, 32, 0.8), 128 << 10);
    }

    #[test]
    fn max_entries_monotonicity_and_edges() {
        let device = DeviceProfile::u250();
        let base = max_entries(&device, 4, 2, 4, 32, 32, 0.8);
        let doubled_k = max_entries(&device, 4, 4, 4, 32, 32, 0.8);
        assert!(doubled_k <= base / 2);
        assert_eq!(max_entries(&device, 4, 2, 4, 32, 32, 1e-9), 0);
    }

    #[test]
    fn device_bit_totals() {
        // 360 Mb of URAM, 229 Mb of M20K (binary megabits).
        assert_eq!(DeviceProfile::u250().total_bits(), 360 * (1 << 20));
        let m20k = DeviceProfile::stratix10().total_bits() as f64 / (1u64 << 20) as f64;
        assert!((m20k - 228.9).abs() < 0.2);
    }

    #[test]
    fn plan_sweep_spans_figure_range() {
        // p in {2,4,8,16}, all NSQ ratios, 50K x 2 x (4B+4B): the curve
        // family runs from under 2 MB to over 100 MB and grows with k.
        let device = DeviceProfile::u250();
        let ps = [2, 4, 8, 16];
        let mut min_bytes = f64::MAX;
        let mut max_bytes = 0.0f64;
        for &p in &ps {
            let mut prev = 0.0;
            for k in 1..=p {
                let g = geom(p, k, 50_000, 2, 32, 32);
                let b = table_memory_bytes(&g);
                assert!(b > prev);
                prev = b;
                min_bytes = min_bytes.min(b);
                max_bytes = max_bytes.max(b);
            }
        }
        assert!(min_bytes < 2e6);
        assert!(max_bytes > 100e6);
        let _ = &device;
    }
}
