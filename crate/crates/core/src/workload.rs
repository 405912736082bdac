//! Reproducible query-trace generation and the trace text format.
//!
//! Three generators: uniform random traffic, adversarial single-bucket
//! traffic (every key is a preimage of one bucket, found by exploiting the
//! hash's GF(2) linearity), and conflict-free traffic whose same-key and
//! same-bucket mutations are spaced beyond the consistency window so a
//! sequential oracle must agree with the simulator exactly.
//!
//! All generators place non-search queries so that no aligned batch of `p`
//! trace positions carries more than `k` of them, which is the contract the
//! dispatch fabric guarantees never to defer under.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::Operation;
use crate::h3::H3Matrix;
use crate::rng::SplitMix64;

/// Relative weights of the mutation kinds within the NSQ share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpMix {
    pub insert: f64,
    pub update: f64,
    pub delete: f64,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix { insert: 1.0, update: 1.0, delete: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub total: u64,
    /// Fraction of queries that mutate; must not exceed `k / p`.
    pub nsq_fraction: f64,
    pub mix: OpMix,
    pub key_space_bits: u32,
    /// Probability that an update/delete targets a previously inserted key.
    pub hit_probability: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            total: 10_000,
            nsq_fraction: 0.5,
            mix: OpMix::default(),
            key_space_bits: 32,
            hit_probability: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadError {
    /// The requested NSQ share exceeds what `k` mutation PEs can absorb
    /// per cycle without deferring.
    NsqFractionExceedsContract { fraction: f64, limit: f64 },
    FractionOutOfRange(f64),
    NonPositiveWeights,
    KeySpaceBitsOutOfRange(u32),
    /// No key hashes to the requested bucket (target outside the row space).
    TargetUnreachable { bucket: u64 },
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::NsqFractionExceedsContract { fraction, limit } => write!(
                f,
                "nsq_fraction {fraction} exceeds k/p = {limit}: the fabric would defer; lower the fraction or raise k"
            ),
            WorkloadError::FractionOutOfRange(v) => {
                write!(f, "fraction {v} outside [0, 1]")
            }
            WorkloadError::NonPositiveWeights => {
                write!(f, "op mix weights must be non-negative and sum to a positive value")
            }
            WorkloadError::KeySpaceBitsOutOfRange(b) => {
                write!(f, "key_space_bits {b} not in 1..=128")
            }
            WorkloadError::TargetUnreachable { bucket } => write!(
                f,
                "bucket {bucket} has no preimage under this hash matrix (rank-deficient row space)"
            ),
        }
    }
}

impl core::error::Error for WorkloadError {}

fn validate_spec(spec: &WorkloadSpec, p: usize, k: usize) -> Result<(), WorkloadError> {
    if !(0.0..=1.0).contains(&spec.nsq_fraction) {
        return Err(WorkloadError::FractionOutOfRange(spec.nsq_fraction));
    }
    let limit = k as f64 / p as f64;
    if spec.nsq_fraction > limit + 1e-12 {
        return Err(WorkloadError::NsqFractionExceedsContract {
            fraction: spec.nsq_fraction,
            limit,
        });
    }
    if !(0.0..=1.0).contains(&spec.hit_probability) {
        return Err(WorkloadError::FractionOutOfRange(spec.hit_probability));
    }
    let OpMix { insert, update, delete } = spec.mix;
    if spec.nsq_fraction > 0.0
        && (insert < 0.0 || update < 0.0 || delete < 0.0 || insert + update + delete <= 0.0)
    {
        return Err(WorkloadError::NonPositiveWeights);
    }
    if spec.key_space_bits == 0 || spec.key_space_bits > 128 {
        return Err(WorkloadError::KeySpaceBitsOutOfRange(spec.key_space_bits));
    }
    Ok(())
}

/// Marks which trace positions carry mutations: per aligned batch of `p`,
/// an integer quota accumulates `p * fraction` and never exceeds `k`, with
/// the chosen positions shuffled inside the batch.
fn plan_nsq_positions(
    total: u64,
    p: usize,
    k: usize,
    fraction: f64,
    rng: &mut SplitMix64,
) -> Vec<bool> {
    let mut flags = alloc::vec![false; total as usize];
    let mut quota = 0.0f64;
    let mut base = 0usize;
    while base < flags.len() {
        let len = (flags.len() - base).min(p);
        quota += len as f64 * fraction;
        let count = (quota as u64 as usize).min(k).min(len);
        quota -= count as f64;
        // Partial shuffle picks `count` distinct offsets in the batch.
        let mut offsets: Vec<usize> = (0..len).collect();
        for i in 0..len {
            let j = i + rng.below((len - i) as u64) as usize;
            offsets.swap(i, j);
        }
        for &off in offsets.iter().take(count) {
            flags[base + off] = true;
        }
        base += len;
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NsqKind {
    Insert,
    Update,
    Delete,
}

fn pick_nsq_kind(mix: &OpMix, rng: &mut SplitMix64) -> NsqKind {
    let total = mix.insert + mix.update + mix.delete;
    let x = rng.next_f64() * total;
    if x < mix.insert {
        NsqKind::Insert
    } else if x < mix.insert + mix.update {
        NsqKind::Update
    } else {
        NsqKind::Delete
    }
}

/// Uniform random trace: operation types drawn per mix, keys uniform over
/// the key space, update/delete targets drawn from previously inserted keys
/// with the configured hit probability.
pub fn gen_uniform(
    spec: &WorkloadSpec,
    p: usize,
    k: usize,
) -> Result<Vec<Operation>, WorkloadError> {
    validate_spec(spec, p, k)?;
    let mut rng = SplitMix64::new(spec.seed);
    let flags = plan_nsq_positions(spec.total, p, k, spec.nsq_fraction, &mut rng);

    let mut inserted: Vec<u128> = Vec::new();
    let mut ops = Vec::with_capacity(spec.total as usize);
    for is_nsq in flags {
        if !is_nsq {
            ops.push(Operation::Search { key: rng.key_bits(spec.key_space_bits) });
            continue;
        }
        let kind = pick_nsq_kind(&spec.mix, &mut rng);
        let target = |rng: &mut SplitMix64, inserted: &[u128]| {
            if !inserted.is_empty() && rng.next_f64() < spec.hit_probability {
                inserted[rng.below(inserted.len() as u64) as usize]
            } else {
                rng.key_bits(spec.key_space_bits)
            }
        };
        let op = match kind {
            NsqKind::Insert => {
                let key = rng.key_bits(spec.key_space_bits);
                inserted.push(key);
                Operation::Insert { key, value: rng.key_bits(spec.key_space_bits) }
            }
            NsqKind::Update => Operation::Update {
                key: target(&mut rng, &inserted),
                value: rng.key_bits(spec.key_space_bits),
            },
            NsqKind::Delete => Operation::Delete { key: target(&mut rng, &inserted) },
        };
        ops.push(op);
    }
    Ok(ops)
}

/// GF(2) basis of the hash map's row space, with preimage masks, plus a
/// kernel basis. Supports solving `h(x) = bucket` and enumerating the full
/// preimage coset.
struct Gf2Solver {
    /// (reduced row value, key mask that produces it), pivot-sorted.
    basis: Vec<(u64, u128)>,
    kernel: Vec<u128>,
}

impl Gf2Solver {
    fn new(matrix: &H3Matrix) -> Self {
        let mut basis: Vec<(u64, u128)> = Vec::new();
        let mut kernel = Vec::new();
        for (m, &row) in matrix.rows().iter().enumerate() {
            let mut v = row;
            let mut mask = 1u128 << m;
            // Reduce by the unique basis element sharing the leading bit
            // until none does (basis keeps distinct leading bits).
            while v != 0 {
                match basis.iter().find(|(bv, _)| bv.leading_zeros() == v.leading_zeros()) {
                    Some(&(bv, bm)) => {
                        v ^= bv;
                        mask ^= bm;
                    }
                    None => break,
                }
            }
            if v == 0 {
                kernel.push(mask);
            } else {
                basis.push((v, mask));
            }
        }
        Gf2Solver { basis, kernel }
    }

    fn rank(&self) -> u32 {
        self.basis.len() as u32
    }

    fn kernel_dim(&self) -> u32 {
        self.kernel.len() as u32
    }

    /// One key hashing to `target`, if the target is reachable.
    fn preimage(&self, target: u64) -> Option<u128> {
        let mut t = target;
        let mut mask = 0u128;
        while t != 0 {
            match self.basis.iter().find(|(bv, _)| bv.leading_zeros() == t.leading_zeros()) {
                Some(&(bv, bm)) => {
                    t ^= bv;
                    mask ^= bm;
                }
                None => return None,
            }
        }
        Some(mask)
    }

    /// The `i`-th element of the preimage coset of `x0` (wraps past the
    /// coset size).
    fn coset_element(&self, x0: u128, i: u64) -> u128 {
        let mut key = x0;
        for (j, &kern) in self.kernel.iter().enumerate().take(64) {
            if (i >> j) & 1 == 1 {
                key ^= kern;
            }
        }
        key
    }

    /// Number of distinct preimages, saturating at 2^63.
    fn coset_size(&self) -> u64 {
        1u64 << self.kernel_dim().min(63)
    }
}

/// Kernel dimension of the hash map; the preimage set of any reachable
/// bucket has `2^dim` keys.
pub fn kernel_dimension(matrix: &H3Matrix) -> u32 {
    Gf2Solver::new(matrix).kernel_dim()
}

pub fn hash_rank(matrix: &H3Matrix) -> u32 {
    Gf2Solver::new(matrix).rank()
}

/// `count` keys (distinct while the preimage set lasts) all hashing to
/// `target` under `matrix`.
pub fn same_bucket_keys(
    matrix: &H3Matrix,
    target: u64,
    count: u64,
) -> Result<Vec<u128>, WorkloadError> {
    let solver = Gf2Solver::new(matrix);
    let x0 = solver
        .preimage(target)
        .ok_or(WorkloadError::TargetUnreachable { bucket: target })?;
    Ok((0..count).map(|i| solver.coset_element(x0, i)).collect())
}

/// Adversarial trace: every key hashes to `target`, so all traffic lands in
/// one bucket. Update/delete targets reuse earlier keys with the configured
/// hit probability; searches probe the same preimage set.
pub fn gen_same_bucket(
    spec: &WorkloadSpec,
    matrix: &H3Matrix,
    target: u64,
    p: usize,
    k: usize,
) -> Result<Vec<Operation>, WorkloadError> {
    validate_spec(spec, p, k)?;
    let solver = Gf2Solver::new(matrix);
    let x0 = solver
        .preimage(target)
        .ok_or(WorkloadError::TargetUnreachable { bucket: target })?;

    let mut rng = SplitMix64::new(spec.seed);
    let flags = plan_nsq_positions(spec.total, p, k, spec.nsq_fraction, &mut rng);
    let coset = solver.coset_size();

    let mut emitted: Vec<u128> = Vec::new();
    let mut next_fresh = 0u64;
    let mut ops = Vec::with_capacity(spec.total as usize);
    for is_nsq in flags {
        let pick = |rng: &mut SplitMix64, emitted: &[u128], next_fresh: &mut u64| {
            if !emitted.is_empty() && rng.next_f64() < spec.hit_probability {
                emitted[rng.below(emitted.len() as u64) as usize]
            } else {
                let key = solver.coset_element(x0, *next_fresh % coset);
                *next_fresh += 1;
                key
            }
        };
        if !is_nsq {
            let key = pick(&mut rng, &emitted, &mut next_fresh);
            ops.push(Operation::Search { key });
            continue;
        }
        let kind = pick_nsq_kind(&spec.mix, &mut rng);
        let op = match kind {
            NsqKind::Insert => {
                let key = solver.coset_element(x0, next_fresh % coset);
                next_fresh += 1;
                emitted.push(key);
                Operation::Insert { key, value: rng.key_bits(spec.key_space_bits) }
            }
            NsqKind::Update => Operation::Update {
                key: pick(&mut rng, &emitted, &mut next_fresh),
                value: rng.key_bits(spec.key_space_bits),
            },
            NsqKind::Delete => Operation::Delete { key: pick(&mut rng, &emitted, &mut next_fresh) },
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Conflict-free trace: mixed random operations arranged so that no two
/// table-writing mutations share a bucket within the consistency window and
/// no query touches a key that was mutated within the window. On such a
/// trace the simulator must match the sequential oracle exactly.
///
/// `window_cycles` should be `p + t0` (plus any margin); trace position `i`
/// dispatches at cycle `i / p` since the NSQ contract is honored.
pub fn gen_conflict_free(
    spec: &WorkloadSpec,
    matrix: &H3Matrix,
    p: usize,
    k: usize,
    window_cycles: u64,
) -> Result<Vec<Operation>, WorkloadError> {
    validate_spec(spec, p, k)?;
    let cooldown = window_cycles + 2;
    let mut rng = SplitMix64::new(spec.seed);
    let flags = plan_nsq_positions(spec.total, p, k, spec.nsq_fraction, &mut rng);

    fn cooled<K: Ord>(map: &BTreeMap<K, u64>, key: &K, cycle: u64, cooldown: u64) -> bool {
        map.get(key).is_none_or(|&last| cycle >= last + cooldown)
    }

    let mut bucket_cool: BTreeMap<u64, u64> = BTreeMap::new();
    let mut key_cool: BTreeMap<u128, u64> = BTreeMap::new();
    let mut live: Vec<u128> = Vec::new();
    let mut live_set: BTreeMap<u128, usize> = BTreeMap::new();

    let mut ops = Vec::with_capacity(spec.total as usize);
    for (i, is_nsq) in flags.into_iter().enumerate() {
        let cycle = i as u64 / p as u64;

        if !is_nsq {
            // Search: a quiescent live key (hit path) or a fresh key (miss).
            let mut key = None;
            if !live.is_empty() && rng.next_f64() < spec.hit_probability {
                for _ in 0..32 {
                    let cand = live[rng.below(live.len() as u64) as usize];
                    if cooled(&key_cool, &cand, cycle, cooldown) {
                        key = Some(cand);
                        break;
                    }
                }
            }
            let key = key.unwrap_or_else(|| loop {
                let cand = rng.key_bits(spec.key_space_bits);
                if cooled(&key_cool, &cand, cycle, cooldown) && live_set.get(&cand).is_none() {
                    break cand;
                }
            });
            ops.push(Operation::Search { key });
            continue;
        }

        // Mutation slot: find a key whose key and bucket cooldowns allow a
        // write now. Falls back to a guaranteed-miss delete, which reads but
        // never writes.
        let kind = pick_nsq_kind(&spec.mix, &mut rng);
        let wants_live = matches!(kind, NsqKind::Update | NsqKind::Delete)
            && !live.is_empty()
            && rng.next_f64() < spec.hit_probability;

        let mut chosen: Option<u128> = None;
        if wants_live {
            for _ in 0..32 {
                let cand = live[rng.below(live.len() as u64) as usize];
                if cooled(&key_cool, &cand, cycle, cooldown)
                    && cooled(&bucket_cool, &matrix.hash(cand), cycle, cooldown)
                {
                    chosen = Some(cand);
                    break;
                }
            }
        } else {
            for _ in 0..64 {
                let cand = rng.key_bits(spec.key_space_bits);
                if live_set.get(&cand).is_none()
                    && cooled(&key_cool, &cand, cycle, cooldown)
                    && cooled(&bucket_cool, &matrix.hash(cand), cycle, cooldown)
                {
                    chosen = Some(cand);
                    break;
                }
            }
        }

        let op = match chosen {
            None => {
                // Miss-delete: no write, so only the key cooldown matters.
                let key = loop {
                    let cand = rng.key_bits(spec.key_space_bits);
                    if live_set.get(&cand).is_none() && cooled(&key_cool, &cand, cycle, cooldown) {
                        break cand;
                    }
                };
                key_cool.insert(key, cycle);
                Operation::Delete { key }
            }
            Some(key) => {
                key_cool.insert(key, cycle);
                bucket_cool.insert(matrix.hash(key), cycle);
                let is_live = live_set.contains_key(&key);
                match kind {
                    NsqKind::Insert | NsqKind::Update if !is_live => {
                        live_set.insert(key, live.len());
                        live.push(key);
                        match kind {
                            NsqKind::Insert => Operation::Insert {
                                key,
                                value: rng.key_bits(spec.key_space_bits),
                            },
                            _ => Operation::Update {
                                key,
                                value: rng.key_bits(spec.key_space_bits),
                            },
                        }
                    }
                    NsqKind::Insert | NsqKind::Update => Operation::Update {
                        key,
                        value: rng.key_bits(spec.key_space_bits),
                    },
                    NsqKind::Delete => {
                        if let Some(pos) = live_set.remove(&key) {
                            let last = live.len() - 1;
                            live.swap(pos, last);
                            if pos < last {
                                live_set.insert(live[pos], pos);
                            }
                            live.pop();
                        }
                        Operation::Delete { key }
                    }
                }
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Trace text format: one query per line — an op letter (S/I/U/D), the key
/// as fixed-width lowercase hex, and a value field for I/U. Lines starting
/// with `#` are comments.
pub mod trace {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct TraceData {
        pub key_bits: u32,
        pub value_bits: u32,
        pub ops: Vec<Operation>,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct TraceParseError {
        pub line: usize,
        pub kind: TraceErrorKind,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub enum TraceErrorKind {
        UnknownOp(char),
        FieldCount { expected: usize, got: usize },
        BadHex,
        WidthMismatch,
        EmptyOp,
    }

    impl fmt::Display for TraceParseError {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "line {}: ", self.line)?;
            match &self.kind {
                TraceErrorKind::UnknownOp(c) => write!(f, "unknown op letter '{c}'"),
                TraceErrorKind::FieldCount { expected, got } => {
                    write!(f, "expected {expected} fields, got {got}")
                }
                TraceErrorKind::BadHex => write!(f, "field is not lowercase hex"),
                TraceErrorKind::WidthMismatch => {
                    write!(f, "hex field width differs from earlier lines")
                }
                TraceErrorKind::EmptyOp => write!(f, "empty op field"),
            }
        }
    }

    impl core::error::Error for TraceParseError {}

    fn hex_digits(bits: u32) -> usize {
        ((bits + 3) / 4) as usize
    }

    pub fn format_trace(data: &TraceData) -> String {
        use core::fmt::Write;
        let kw = hex_digits(data.key_bits);
        let vw = hex_digits(data.value_bits);
        let mut out = String::new();
        for op in &data.ops {
            match *op {
                Operation::Search { key } => {
                    let _ = writeln!(out, "S {key:0kw$x}");
                }
                Operation::Insert { key, value } => {
                    let _ = writeln!(out, "I {key:0kw$x} {value:0vw$x}");
                }
                Operation::Update { key, value } => {
                    let _ = writeln!(out, "U {key:0kw$x} {value:0vw$x}");
                }
                Operation::Delete { key } => {
                    let _ = writeln!(out, "D {key:0kw$x}");
                }
            }
        }
        out
    }

    fn parse_hex(
        field: &str,
        width: &mut Option<usize>,
        line: usize,
    ) -> Result<u128, TraceParseError> {
        match width {
            Some(w) if *w != field.len() => {
                return Err(TraceParseError { line, kind: TraceErrorKind::WidthMismatch })
            }
            None => *width = Some(field.len()),
            _ => {}
        }
        if field.is_empty()
            || field.len() > 32
            || !field.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(TraceParseError { line, kind: TraceErrorKind::BadHex });
        }
        u128::from_str_radix(field, 16)
            .map_err(|_| TraceParseError { line, kind: TraceErrorKind::BadHex })
    }

    /// Parses the text format. Key and value widths are inferred from the
    /// fixed-width hex fields (4 bits per digit); a trace with no
    /// insert/update lines gets `value_bits = key_bits`.
    pub fn parse_trace(text: &str) -> Result<TraceData, TraceParseError> {
        let mut key_width: Option<usize> = None;
        let mut value_width: Option<usize> = None;
        let mut ops = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let op_field = fields[0];
            if op_field.len() != 1 {
                return Err(TraceParseError {
                    line: line_no,
                    kind: if op_field.is_empty() {
                        TraceErrorKind::EmptyOp
                    } else {
                        TraceErrorKind::UnknownOp(op_field.chars().next().unwrap())
                    },
                });
            }
            let letter = op_field.chars().next().unwrap();
            let expect = |n: usize| -> Result<(), TraceParseError> {
                if fields.len() != n {
                    Err(TraceParseError {
                        line: line_no,
                        kind: TraceErrorKind::FieldCount { expected: n, got: fields.len() },
                    })
                } else {
                    Ok(())
                }
            };
            let op = match letter {
                'S' => {
                    expect(2)?;
                    Operation::Search { key: parse_hex(fields[1], &mut key_width, line_no)? }
                }
                'I' => {
                    expect(3)?;
                    Operation::Insert {
                        key: parse_hex(fields[1], &mut key_width, line_no)?,
                        value: parse_hex(fields[2], &mut value_width, line_no)?,
                    }
                }
                'U' => {
                    expect(3)?;
                    Operation::Update {
                        key: parse_hex(fields[1], &mut key_width, line_no)?,
                        value: parse_hex(fields[2], &mut value_width, line_no)?,
                    }
                }
                'D' => {
                    expect(2)?;
                    Operation::Delete { key: parse_hex(fields[1], &mut key_width, line_no)? }
                }
                other => {
                    return Err(TraceParseError {
                        line: line_no,
                        kind: TraceErrorKind::UnknownOp(other),
                    })
                }
            };
            ops.push(op);
        }
        let key_bits = key_width.map(|w| w as u32 * 4).unwrap_or(32);
        let value_bits = value_width.map(|w| w as u32 * 4).unwrap_or(key_bits);
        Ok(TraceData { key_bits, value_bits, ops })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_fraction_is_all_searches() {
        let spec = WorkloadSpec { total: 100, nsq_fraction: 0.0, ..WorkloadSpec::default() };
        let ops = gen_uniform(&spec, 4, 2).unwrap();
        assert!(ops.iter().all(|op| !op.is_nsq()));
    }

    #[test]
    fn batches_respect_nsq_contract() {
        let (p, k) = (8, 4);
        let spec = WorkloadSpec { total: 100_000, nsq_fraction: 0.5, ..WorkloadSpec::default() };
        let ops = gen_uniform(&spec, p, k).unwrap();
        for chunk in ops.chunks(p) {
            assert!(chunk.iter().filter(|op| op.is_nsq()).count() <= k);
        }
        let nsq_total = ops.iter().filter(|op| op.is_nsq()).count();
        assert!((nsq_total as f64 - 50_000.0).abs() < 8.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let spec = WorkloadSpec { total: 1000, ..WorkloadSpec::default() };
        assert_eq!(gen_uniform(&spec, 4, 4).unwrap(), gen_uniform(&spec, 4, 4).unwrap());
    }

    #[test]
    fn over_contract_fraction_rejected() {
        let spec = WorkloadSpec { nsq_fraction: 0.75, ..WorkloadSpec::default() };
        assert!(matches!(
            gen_uniform(&spec, 4, 2),
            Err(WorkloadError::NsqFractionExceedsContract { .. })
        ));
    }

    #[test]
    fn same_bucket_keys_all_hit_target() {
        let matrix = H3Matrix::new(32, 8, 9).unwrap();
        let keys = same_bucket_keys(&matrix, 0x5a, 500).unwrap();
        assert!(keys.iter().all(|&k| matrix.hash(k) == 0x5a));
    }

    #[test]
    fn same_bucket_distinct_count_matches_kernel_dimension() {
        let matrix = H3Matrix::new(12, 8, 3).unwrap();
        let solver_dim = kernel_dimension(&matrix);
        let requested = 1u64 << 12;
        let keys = same_bucket_keys(&matrix, matrix.hash(1), requested).unwrap();
        let mut distinct: Vec<u128> = keys.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len() as u64, (1u64 << solver_dim).min(requested));
    }

    #[test]
    fn rank_deficient_target_unreachable() {
        // All rows zero: only bucket 0 is reachable.
        let matrix = H3Matrix::from_rows(4, vec![0, 0, 0]).unwrap();
        assert!(matches!(
            same_bucket_keys(&matrix, 3, 4),
            Err(WorkloadError::TargetUnreachable { bucket: 3 })
        ));
        assert!(same_bucket_keys(&matrix, 0, 4).is_ok());
    }

    #[test]
    fn same_bucket_trace_postcondition() {
        let matrix = H3Matrix::new(32, 6, 4).unwrap();
        let spec = WorkloadSpec { total: 2000, nsq_fraction: 1.0, ..WorkloadSpec::default() };
        let ops = gen_same_bucket(&spec, &matrix, 17, 4, 4).unwrap();
        assert_eq!(ops.len(), 2000);
        assert!(ops.iter().all(|op| matrix.hash(op.key()) == 17));
    }

    #[test]
    fn kernel_and_rank_partition_key_bits() {
        for seed in 0..20 {
            let matrix = H3Matrix::new(24, 10, seed).unwrap();
            assert_eq!(hash_rank(&matrix) + kernel_dimension(&matrix), 24);
        }
    }

    #[test]
    fn preimage_solver_agrees_with_exhaustive_search() {
        let matrix = H3Matrix::new(10, 6, 13).unwrap();
        let mut reachable = alloc::collections::BTreeMap::new();
        for key in 0u128..1024 {
            reachable.entry(matrix.hash(key)).or_insert(key);
        }
        for bucket in 0u64..64 {
            match same_bucket_keys(&matrix, bucket, 1) {
                Ok(keys) => {
                    assert!(reachable.contains_key(&bucket));
                    assert_eq!(matrix.hash(keys[0]), bucket);
                }
                Err(_) => assert!(!reachable.contains_key(&bucket)),
            }
        }
    }

    #[test]
    fn conflict_free_trace_spaces_same_bucket_writes() {
        let matrix = H3Matrix::new(32, 8, 21).unwrap();
        let (p, k) = (4, 2);
        let window = 9u64; // p + t0 with default stages
        let spec = WorkloadSpec {
            total: 4000,
            nsq_fraction: 0.4,
            key_space_bits: 32,
            ..WorkloadSpec::default()
        };
        let ops = gen_conflict_free(&spec, &matrix, p, k, window).unwrap();
        assert_eq!(ops.len(), 4000);
        // Re-scan: table-writing mutations never share a bucket within the
        // cooldown, and no query reuses a key mutated within the cooldown.
        let mut bucket_last: BTreeMap<u64, u64> = BTreeMap::new();
        let mut key_last: BTreeMap<u128, u64> = BTreeMap::new();
        let mut live: alloc::collections::BTreeSet<u128> = Default::default();
        for (i, op) in ops.iter().enumerate() {
            let cycle = i as u64 / p as u64;
            if let Some(&last) = key_last.get(&op.key()) {
                assert!(cycle >= last + window, "query {i} inside key window");
            }
            if op.is_nsq() {
                let writes = match op {
                    Operation::Delete { key } => live.contains(key),
                    _ => true,
                };
                if writes {
                    let bucket = matrix.hash(op.key());
                    if let Some(&last) = bucket_last.get(&bucket) {
                        assert!(cycle >= last + window, "mutation {i} inside bucket window");
                    }
                    bucket_last.insert(bucket, cycle);
                }
                key_last.insert(op.key(), cycle);
                match op {
                    Operation::Insert { key, .. } | Operation::Update { key, .. } => {
                        live.insert(*key);
                    }
                    Operation::Delete { key } => {
                        live.remove(key);
                    }
                    _ => {}
                }
            }
        }
        // The mix should still contain real hits.
        assert!(ops.iter().any(|op| matches!(op, Operation::Update { .. })));
        assert!(ops.iter().any(|op| matches!(op, Operation::Delete { .. })));
    }

    #[test]
    fn trace_round_trip() {
        let data = trace::TraceData {
            key_bits: 32,
            value_bits: 32,
            ops: vec![
                Operation::Insert { key: 0x7, value: 0x2a },
                Operation::Search { key: 0xdeadbeef },
                Operation::Update { key: 0x7, value: 0x2b },
                Operation::Delete { key: 0x7 },
            ],
        };
        let text = trace::format_trace(&data);
        let back = trace::parse_trace(&text).unwrap();
        assert_eq!(back, data);
        assert_eq!(trace::format_trace(&back), text);
    }

    #[test]
    fn trace_format_worked_example() {
        let parsed = trace::parse_trace("I 00000007 0000002a\n").unwrap();
        assert_eq!(parsed.ops, vec![Operation::Insert { key: 0x7, value: 0x2a }]);
        assert_eq!(parsed.key_bits, 32);
    }

    #[test]
    fn trace_parse_reports_line_numbers() {
        let err = trace::parse_trace("# header\nS 00000001\nX 00 00\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(matches!(err.kind, trace::TraceErrorKind::UnknownOp('X')));

        let err = trace::parse_trace("S 0000001\nS 00000001\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(matches!(err.kind, trace::TraceErrorKind::WidthMismatch));

        let err = trace::parse_trace("I 00000001\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(matches!(err.kind, trace::TraceErrorKind::FieldCount { .. }));

        let err = trace::parse_trace("S 0000000G\n").unwrap_err();
        assert!(matches!(err.kind, trace::TraceErrorKind::BadHex));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let parsed = trace::parse_trace("# a comment\n\nS ff\n").unwrap();
        assert_eq!(parsed.ops.len(), 1);
        assert_eq!(parsed.key_bits, 8);
    }
}
