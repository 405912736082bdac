//! XOR-encoded banked storage.
//!
//! A replica holds `k` banks. Bank `b` is owned by mutation PE `b` and is the
//! only place that PE's writes ever land, in every replica. A stored cell is
//! a fragment: XOR-ing the fragments of all `k` banks at one (entry, slot)
//! recovers the key-value pair, and the XOR of the one-bit occupancy
//! fragments is the slot's occupancy. A writer therefore encodes a new value
//! by XOR-ing it with the current fragments of every bank it does *not* own;
//! on all-zero peer banks this degenerates to the raw pair.
//!
//! Banks are 1R1W: one full-row read and one slot write per simulated cycle.
//! Two writes into one bank in one cycle is a simulator bug and surfaces as a
//! `DisciplineViolation`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Key/value widths in bits, 1..=128 each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotGeometry {
    pub key_bits: u32,
    pub value_bits: u32,
}

impl SlotGeometry {
    pub fn new(key_bits: u32, value_bits: u32) -> Self {
        debug_assert!((1..=128).contains(&key_bits));
        debug_assert!((1..=128).contains(&value_bits));
        Self { key_bits, value_bits }
    }

    pub fn key_mask(&self) -> u128 {
        mask_bits(self.key_bits)
    }

    pub fn value_mask(&self) -> u128 {
        mask_bits(self.value_bits)
    }

    /// Data bits per slot word (occupancy parity bit not included).
    pub fn data_bits(&self) -> u32 {
        self.key_bits + self.value_bits
    }
}

fn mask_bits(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// One XOR fragment: the data word split at the key/value boundary, plus the
/// occupancy parity bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodedSlot {
    pub key_x: u128,
    pub value_x: u128,
    pub occ_x: bool,
}

impl EncodedSlot {
    pub fn xor(self, other: EncodedSlot) -> EncodedSlot {
        EncodedSlot {
            key_x: self.key_x ^ other.key_x,
            value_x: self.value_x ^ other.value_x,
            occ_x: self.occ_x != other.occ_x,
        }
    }
}

/// Result of XOR-reducing one slot across all banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedSlot {
    pub occupied: bool,
    /// Residue when `occupied` is false; carries no meaning then.
    pub key: u128,
    pub value: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisciplineViolation {
    /// Two writes into one bank in one cycle.
    DoubleWrite { owner: usize, entry: usize, cycle: u64 },
    /// Two row reads from one bank in one cycle.
    DoubleRowRead { owner: usize, entry: usize, cycle: u64 },
}

impl fmt::Display for DisciplineViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisciplineViolation::DoubleWrite { owner, entry, cycle } => write!(
                f,
                "1R1W discipline violation: second write to bank {owner} (entry {entry}) in cycle {cycle}"
            ),
            DisciplineViolation::DoubleRowRead { owner, entry, cycle } => write!(
                f,
                "1R1W discipline violation: second row read from bank {owner} (entry {entry}) in cycle {cycle}"
            ),
        }
    }
}

impl core::error::Error for DisciplineViolation {}

/// One single-read-single-write bank. Only mutation PE `owner` writes it.
#[derive(Debug, Clone)]
pub struct Bank {
    owner: usize,
    entries: usize,
    slots: usize,
    cells: Vec<EncodedSlot>,
    last_write_cycle: Option<u64>,
    last_read_cycle: Option<u64>,
}

impl Bank {
    pub fn new(owner: usize, entries: usize, slots: usize) -> Self {
        Self {
            owner,
            entries,
            slots,
            cells: vec![EncodedSlot::default(); entries * slots],
            last_write_cycle: None,
            last_read_cycle: None,
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    fn idx(&self, entry: usize, slot: usize) -> usize {
        debug_assert!(entry < self.entries && slot < self.slots);
        entry * self.slots + slot
    }

    pub fn cell(&self, entry: usize, slot: usize) -> EncodedSlot {
        self.cells[self.idx(entry, slot)]
    }

    /// Replaces the cell verbatim, enforcing the one-write-per-cycle rule.
    pub fn apply_write(
        &mut self,
        entry: usize,
        slot: usize,
        word: EncodedSlot,
        cycle: u64,
    ) -> Result<(), DisciplineViolation> {
        if self.last_write_cycle == Some(cycle) {
            return Err(DisciplineViolation::DoubleWrite { owner: self.owner, entry, cycle });
        }
        self.last_write_cycle = Some(cycle);
        let i = self.idx(entry, slot);
        self.cells[i] = word;
        Ok(())
    }

    /// Reads one full entry row, enforcing the one-read-per-cycle rule.
    pub fn read_row(
        &mut self,
        entry: usize,
        cycle: u64,
    ) -> Result<&[EncodedSlot], DisciplineViolation> {
        if self.last_read_cycle == Some(cycle) {
            return Err(DisciplineViolation::DoubleRowRead { owner: self.owner, entry, cycle });
        }
        self.last_read_cycle = Some(cycle);
        let start = self.idx(entry, 0);
        Ok(&self.cells[start..start + self.slots])
    }

    /// Untracked row view for post-run inspection and oracles.
    pub fn peek_row(&self, entry: usize) -> &[EncodedSlot] {
        let start = self.idx(entry, 0);
        &self.cells[start..start + self.slots]
    }
}

/// One PE's copy of the table: `k` banks of identical geometry.
#[derive(Debug, Clone)]
pub struct Replica {
    geometry: SlotGeometry,
    entries: usize,
    slots: usize,
    banks: Vec<Bank>,
}

impl Replica {
    pub fn new(bank_count: usize, entries: usize, slots: usize, geometry: SlotGeometry) -> Self {
        let banks = (0..bank_count).map(|b| Bank::new(b, entries, slots)).collect();
        Self { geometry, entries, slots, banks }
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn geometry(&self) -> SlotGeometry {
        self.geometry
    }

    pub fn bank_mut(&mut self, owner: usize) -> &mut Bank {
        &mut self.banks[owner]
    }

    /// Reads the full bucket row from every bank in one cycle and latches it.
    pub fn latch_row(&mut self, entry: usize, cycle: u64) -> Result<RowLatch, DisciplineViolation> {
        let mut grid = Vec::with_capacity(self.banks.len() * self.slots);
        for bank in &mut self.banks {
            grid.extend_from_slice(bank.read_row(entry, cycle)?);
        }
        Ok(RowLatch { geometry: self.geometry, slots: self.slots, entry, grid })
    }

    /// XOR-reduces one slot across all banks (quiescent inspection path).
    pub fn decode_slot(&self, entry: usize, slot: usize) -> DecodedSlot {
        let mut acc = EncodedSlot::default();
        for bank in &self.banks {
            acc = acc.xor(bank.cell(entry, slot));
        }
        DecodedSlot { occupied: acc.occ_x, key: acc.key_x, value: acc.value_x }
    }

    pub fn decode_row(&self, entry: usize) -> Vec<DecodedSlot> {
        (0..self.slots).map(|s| self.decode_slot(entry, s)).collect()
    }

    fn xor_peers(&self, owner: usize, entry: usize, slot: usize) -> EncodedSlot {
        let mut acc = EncodedSlot::default();
        for bank in &self.banks {
            if bank.owner() != owner {
                acc = acc.xor(bank.cell(entry, slot));
            }
        }
        acc
    }

    /// Encodes an insert/update of `(key, value)` against the replica's
    /// current contents. The word XORs out whatever the peer banks hold, so
    /// writing it into bank `owner` makes the slot decode to `(key, value)`.
    pub fn encode_upsert(
        &self,
        owner: usize,
        entry: usize,
        slot: usize,
        key: u128,
        value: u128,
    ) -> EncodedSlot {
        let peers = self.xor_peers(owner, entry, slot);
        EncodedSlot {
            key_x: (key & self.geometry.key_mask()) ^ peers.key_x,
            value_x: (value & self.geometry.value_mask()) ^ peers.value_x,
            occ_x: true != peers.occ_x,
        }
    }

    /// Encodes a delete: occupancy parity is forced to zero, the owner's data
    /// fragment is left as-is (the data residue stays in place).
    pub fn encode_delete(&self, owner: usize, entry: usize, slot: usize) -> EncodedSlot {
        let peers = self.xor_peers(owner, entry, slot);
        let own = self.banks[owner].cell(entry, slot);
        EncodedSlot { key_x: own.key_x, value_x: own.value_x, occ_x: peers.occ_x }
    }

    /// All occupied pairs, sorted, duplicates preserved.
    pub fn occupied_pairs(&self) -> Vec<(u128, u128)> {
        let mut pairs = Vec::new();
        for entry in 0..self.entries {
            for slot in 0..self.slots {
                let d = self.decode_slot(entry, slot);
                if d.occupied {
                    pairs.push((d.key, d.value));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    /// True when every bank cell matches. Replicas of one simulation must
    /// satisfy this after drain.
    pub fn same_cells(&self, other: &Replica) -> bool {
        self.banks.len() == other.banks.len()
            && self
                .banks
                .iter()
                .zip(&other.banks)
                .all(|(a, b)| a.cells == b.cells)
    }

    /// Flat hex dump, bank-major then entry-major then slot-major. Each cell
    /// is one hex digit of occupancy parity followed by fixed-width key and
    /// value fragments.
    pub fn snapshot_hex(&self) -> String {
        use core::fmt::Write;
        let kw = ((self.geometry.key_bits + 3) / 4) as usize;
        let vw = ((self.geometry.value_bits + 3) / 4) as usize;
        let mut out = String::new();
        for bank in &self.banks {
            for entry in 0..self.entries {
                for slot in 0..self.slots {
                    let c = bank.cell(entry, slot);
                    let _ = writeln!(
                        out,
                        "{}{:0kw$x}{:0vw$x}",
                        u8::from(c.occ_x),
                        c.key_x,
                        c.value_x
                    );
                }
            }
        }
        out
    }
}

/// The full bucket row as read from all banks in one cycle. Both reduction
/// trees operate on this latch: decode for resolution, encode for mutation
/// words. Encoding from the latch rather than from live banks is what makes
/// overlapping mutation windows able to leave transient garbage; the
/// consistency checker accounts for that.
#[derive(Debug, Clone)]
pub struct RowLatch {
    geometry: SlotGeometry,
    slots: usize,
    entry: usize,
    /// `grid[bank * slots + slot]`
    grid: Vec<EncodedSlot>,
}

impl RowLatch {
    pub fn entry(&self) -> usize {
        self.entry
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    fn cell(&self, bank: usize, slot: usize) -> EncodedSlot {
        self.grid[bank * self.slots + slot]
    }

    fn bank_count(&self) -> usize {
        self.grid.len() / self.slots
    }

    pub fn decode_slot(&self, slot: usize) -> DecodedSlot {
        let mut acc = EncodedSlot::default();
        for bank in 0..self.bank_count() {
            acc = acc.xor(self.cell(bank, slot));
        }
        DecodedSlot { occupied: acc.occ_x, key: acc.key_x, value: acc.value_x }
    }

    pub fn decode_row(&self) -> Vec<DecodedSlot> {
        (0..self.slots).map(|s| self.decode_slot(s)).collect()
    }

    fn xor_peers(&self, owner: usize, slot: usize) -> EncodedSlot {
        let mut acc = EncodedSlot::default();
        for bank in 0..self.bank_count() {
            if bank != owner {
                acc = acc.xor(self.cell(bank, slot));
            }
        }
        acc
    }

    pub fn encode_upsert(&self, owner: usize, slot: usize, key: u128, value: u128) -> EncodedSlot {
        let peers = self.xor_peers(owner, slot);
        EncodedSlot {
            key_x: (key & self.geometry.key_mask()) ^ peers.key_x,
            value_x: (value & self.geometry.value_mask()) ^ peers.value_x,
            occ_x: true != peers.occ_x,
        }
    }

    pub fn encode_delete(&self, owner: usize, slot: usize) -> EncodedSlot {
        let peers = self.xor_peers(owner, slot);
        let own = self.cell(owner, slot);
        EncodedSlot { key_x: own.key_x, value_x: own.value_x, occ_x: peers.occ_x }
    }
}

/// Port counts of a generic XOR-banked multiport memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XorMemSpec {
    pub read_ports: u64,
    pub write_ports: u64,
}

/// SRAM blocks needed for an mR/nW XOR memory: `n*(n-1+m)` in the original
/// arrangement, `m*n` when reads and writes share the read ports.
pub fn blocks_required(spec: XorMemSpec, shared_read_ports: bool) -> u64 {
    let (m, n) = (spec.read_ports, spec.write_ports);
    debug_assert!(m >= 1 && n >= 1);
    if shared_read_ports {
        m * n
    } else {
        n * (n - 1 + m)
    }
}
